#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "commutators.hpp"
#include "models.hpp"

using namespace tempo;

TEST_CASE("catalog lists the seven shipped models in order") {
    auto cat = catalog();
    REQUIRE(cat.size() == 7);
    const char* ids[] = {"jacobi_hermite", "jacobi_laguerre", "friedrichs", "convolution_zd",
                         "dispersive",     "adjacency",       "waveguide"};
    for (size_t i = 0; i < 7; ++i) {
        CHECK(cat[i].model_id == ids[i]);
        CHECK_FALSE(model_schema(ids[i]).empty());
    }
    CHECK_THROWS_AS(model_schema("harmonic"), Error);
}

TEST_CASE("parameter resolution") {
    auto p = resolve_params("dispersive", {{"N", "64"}});
    CHECK(p.at("N") == "64");
    CHECK(p.at("L") == "128");
    CHECK_THROWS_AS(resolve_params("dispersive", {{"box", "64"}}), Error);
    CHECK(parse_real("pi/2") == doctest::Approx(M_PI / 2).epsilon(1e-15));
    CHECK(parse_real("-pi") == doctest::Approx(-M_PI).epsilon(1e-15));
    CHECK(parse_real_list("1, 2.5,-3") == std::vector<double>{1.0, 2.5, -3.0});
    CHECK(size_key("convolution_zd") == "box");
    CHECK(size_key("adjacency") == "z_max");
    CHECK(size_key("waveguide") == "N");
}

TEST_CASE("2cos spectrum is 2 cos(2 pi k / N)") {
    const int N = 64;
    auto pair = build_convolution_zd(two_cos(N));
    RVec ev = eigvalsh(pair.H.m);
    std::vector<double> expect;
    for (int k = 0; k < N; ++k) expect.push_back(2.0 * std::cos(2.0 * M_PI * k / N));
    std::sort(expect.begin(), expect.end());
    for (int k = 0; k < N; ++k) CHECK(ev(k) == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("Hermite section: literal i[H, Phi] is the identity away from the cut") {
    auto pair = build_jacobi_hermite(64);
    CMat hp = I1 * (pair.H.m * pair.Phi[0].m - pair.Phi[0].m * pair.H.m);
    CHECK((hp.topLeftCorner(62, 62) - CMat::Identity(62, 62)).cwiseAbs().maxCoeff() < 1e-13);
    auto der = commutator_chain(pair, 2, true);
    CHECK(interior_norm(der.Hp[0].m - CMat::Identity(64, 64), interior_states(pair)) < 1e-12);
}

TEST_CASE("Laguerre section: literal i[H, Phi] equals H away from the cut") {
    auto pair = build_jacobi_laguerre(64);
    CMat hp = I1 * (pair.H.m * pair.Phi[0].m - pair.Phi[0].m * pair.H.m);
    CHECK((hp - pair.H.m).topLeftCorner(62, 62).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Friedrichs model without potential has H' = v") {
    auto pair = build_model("friedrichs", {{"v", "2"}, {"N", "64"}, {"L", "32"}});
    auto der = commutator_chain(pair, 2, false);
    CHECK(interior_norm(der.Hp[0].m - 2.0 * CMat::Identity(64, 64), interior_states(pair)) < 1e-10);
    CHECK_THROWS_AS(build_model("friedrichs", {{"v", "0"}, {"N", "64"}}), Error);
}

TEST_CASE("graph reconstruction is admissible and its levels carry the pattern") {
    auto g = layered_graph({1, 2}, -8, 7, true, M_PI / 2);
    CHECK(validate_admissible(g).pass);
    std::multiset<int> levels(g.level.begin(), g.level.end());
    CHECK(levels.count(0) + levels.count(1) == 3);
    auto pair = build_adjacency(g);
    CHECK(pair.dim() == g.vertices());
    CHECK(asymmetry(pair.H.m) < 1e-14);
}

TEST_CASE("conjugated family commutes with H") {
    auto pair = build_convolution_zd(two_cos(64));
    auto rep = check_commute_family(pair, sample_shifts(1, 4, 1.0, 5));
    CHECK(rep.max_residual < 1e-12);
}
