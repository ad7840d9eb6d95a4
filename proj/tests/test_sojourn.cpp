#include <doctest.h>

#include <cmath>

#include "models.hpp"
#include "sojourn.hpp"

using namespace tempo;

TEST_CASE("power fit recovers limit, constant and order") {
    std::vector<double> r{10, 20, 40, 80}, I;
    for (double v : r) I.push_back(3.0 + 2.0 * std::pow(v, -1.5));
    auto fit = power_fit(r, I);
    CHECK(fit.I_inf == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(fit.p == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(fit.c == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("concurrent sweep reproduces the serial one bit for bit") {
    auto pair = build_convolution_zd(two_cos(128));
    auto js = joint_spectral(pair, nullptr, true, 1);
    auto lay = layout_of(js, 1);
    auto k = kappa_estimate(js, lay);
    CVec seed = gaussian_packet(pair, RVec::Constant(1, -8.0), RVec::Constant(1, M_PI / 2), 2.0);
    auto st = make_Dt_state(pair, js, lay.h, k, {0.0, 0.2, 1.4, 21}, seed);
    SojournEvaluator ev(pair, js, lay, st.phi);
    LocalisationProfile prof;
    auto a = sojourn_sweep(ev, prof, {4, 6, 8, 10}, 1.0, {}, 1);
    auto b = sojourn_sweep(ev, prof, {4, 6, 8, 10}, 1.0, {}, 2);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].r == b.rows[i].r);
        CHECK(a.rows[i].I_r == b.rows[i].I_r);
    }
    CHECK(a.extrapolated == b.extrapolated);
}

TEST_CASE("tail fit ignores a transient in the first rows") {
    std::vector<double> r{10, 20, 40, 80}, I;
    for (double v : r) I.push_back(3.0 + 2.0 * std::pow(v, -2.0) + 50.0 * std::exp(-v));
    PowerFit f;
    REQUIRE(tail_fit(r, I, f));
    CHECK(f.I_inf == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(f.p == doctest::Approx(2.0).epsilon(1e-3));
    std::vector<double> wobble{1.0, 1.2, 1.25, 1.24};
    CHECK_FALSE(tail_fit(r, wobble, f));
}
