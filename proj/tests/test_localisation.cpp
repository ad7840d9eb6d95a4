#include <doctest.h>

#include <cmath>

#include "localisation.hpp"

using namespace tempo;

namespace {

LocalisationProfile profile(ProfileKind kind, int d) {
    LocalisationProfile p;
    p.kind = kind;
    p.d = d;
    return p;
}

RVec point(int d, double radius) {
    RVec x(d);
    for (int j = 0; j < d; ++j) x(j) = 1.0 + 0.37 * j;
    return radius * x.normalized();
}

}  // namespace

TEST_CASE("radial gradient matches -x/|x|^2 on both routes") {
    for (int d : {1, 2, 3}) {
        auto p = profile(ProfileKind::RadialPlateau, d);
        for (double r : {0.5, 3.0, 50.0}) {
            RVec x = point(d, r);
            RVec expect = -x / x.squaredNorm();
            CHECK((eval_Rf_grad(p, x) - expect).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((eval_Rf_grad_quadrature(p, x) - expect).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("product profile obeys the Euler relation") {
    for (int d : {2, 3}) {
        auto p = profile(ProfileKind::ProductPlateau, d);
        for (double r : {0.7, 6.0, 40.0}) {
            RVec x = point(d, r);
            CHECK(std::abs(x.dot(eval_Rf_grad(p, x)) + 1.0) < 1e-9);
        }
    }
}

TEST_CASE("one-dimensional product and radial profiles coincide") {
    auto p = profile(ProfileKind::ProductPlateau, 1);
    RVec x = RVec::Constant(1, 2.5);
    CHECK(eval_Rf_grad_quadrature(p, x)(0) == doctest::Approx(-0.4).epsilon(1e-10));
}

TEST_CASE("renormalised average drops by log t under dilation") {
    for (auto kind : {ProfileKind::RadialPlateau, ProfileKind::ProductPlateau}) {
        auto p = profile(kind, 2);
        RVec x = point(2, 1.5);
        double a = eval_Rf(p, x).value, b = eval_Rf(p, 4.0 * x).value;
        CHECK(b - a == doctest::Approx(-std::log(4.0)).epsilon(1e-9));
    }
}

TEST_CASE("profile validation") {
    auto p = profile(ProfileKind::RadialPlateau, 2);
    CHECK(validate_profile(p).ok());
    p.smooth_order = 4;
    CHECK_THROWS_AS(require_valid(p), Error);

    auto c = profile(ProfileKind::Custom, 1);
    c.custom_f = [](const RVec& x) { return x(0) > 0 ? std::exp(-x(0) * x(0)) : 1.0; };
    CHECK_THROWS_AS(require_valid(c), Error);

    auto ind = profile(ProfileKind::IndicatorBall, 2);
    CHECK_FALSE(ind.differentiable());
    CHECK_THROWS_AS(eval_Rf_grad(ind, point(2, 1.0)), Error);
    CHECK(profile_kind_from_string(to_string(ProfileKind::ProductPlateau)) == ProfileKind::ProductPlateau);
}
