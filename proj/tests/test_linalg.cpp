#include <doctest.h>

#include <cmath>

#include "linalg.hpp"

using namespace tempo;

TEST_CASE("cubic smoothstep and its derivative") {
    for (double u : {0.1, 0.25, 0.5, 0.8}) {
        CHECK(smoothstep(3, u) == doctest::Approx(3 * u * u - 2 * u * u * u).epsilon(1e-14));
        CHECK(smoothstep_deriv(3, u) == doctest::Approx(6 * u - 6 * u * u).epsilon(1e-14));
    }
    CHECK(smoothstep(9, 0.0) == 0.0);
    CHECK(smoothstep(9, 1.0) == 1.0);
    CHECK(smoothstep(9, 0.5) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(smoothstep(4, 0.3), Error);
}

TEST_CASE("filter is one on the window and zero beyond the margin") {
    SpectralFilter f{1.0, 0.5, 0.25, 5};
    CHECK(f.eta(1.2) == 1.0);
    CHECK(f.eta(0.5) == 1.0);
    CHECK(f.eta(1.8) == 0.0);
    CHECK(f.eta(1.625) == doctest::Approx(0.5).epsilon(1e-14));
    SpectralFilter bad{0.0, 1.0, 0.0, 5};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("make_hermitian rejects asymmetric input") {
    CMat a(2, 2);
    a << 1.0, cplx(0.0, 1.0), cplx(0.0, 1.0), 2.0;
    CHECK_THROWS_AS(make_hermitian(a, "A"), Error);
    a(1, 0) = cplx(0.0, -1.0);
    auto es = eigh(make_hermitian(a, "A"));
    // eigenvalues of [[1, i], [-i, 2]]: (3 -+ sqrt 5) / 2
    CHECK(es.values(0) == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
    CHECK(es.values(1) == doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
}

TEST_CASE("joint diagonalization separates a degenerate eigenspace") {
    // A = diag(1, 1, 2) in a rotated basis, B splits the degenerate pair
    RVec a(3), b(3);
    a << 1.0, 1.0, 2.0;
    b << -1.0, 1.0, 0.0;
    CMat q = CMat::Identity(3, 3);
    const double c = std::cos(0.3), s = std::sin(0.3);
    q(0, 0) = c;
    q(0, 1) = -s;
    q(1, 0) = s;
    q(1, 1) = c;
    auto A = make_hermitian(from_diag(q, a), "A");
    auto B = make_hermitian(from_diag(q, b), "B");
    auto js = joint_diagonalize({&A, &B}, 1e-10, 3);
    REQUIRE(js.size() == 3);
    for (Index i = 0; i < 3; ++i) {
        CVec v = js.basis.col(i);
        CHECK((A.m * v - js.table(i, 0) * v).norm() < 1e-12);
        CHECK((B.m * v - js.table(i, 1) * v).norm() < 1e-12);
    }
}
