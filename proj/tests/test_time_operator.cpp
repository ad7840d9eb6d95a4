#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "models.hpp"
#include "spectral.hpp"
#include "time_operator.hpp"

using namespace tempo;

namespace {

struct Setup {
    OperatorPair pair;
    JointSpectralData js;
    TupleLayout lay;
    CriticalSetEstimate kappa;
    TimeOperatorForm tf;
    std::vector<CVec> states;
};

Setup setup(OperatorPair pair, const SpectralFilter& filter) {
    Setup s{std::move(pair), {}, {}, {}, {}, {}};
    s.js = joint_spectral(s.pair, nullptr, true, 2);
    s.lay = layout_of(s.js, 1);
    s.kappa = kappa_estimate(s.js, s.lay);
    LocalisationProfile prof;
    s.tf = build_Tf(s.pair, s.js, s.lay, prof, filter, true);
    s.states = filtered_test_states(s.pair, s.js, s.lay.h, s.kappa, filter, 6, 9);
    return s;
}

double rel_gap(cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("free Friedrichs model: T_f is the position operator on filtered states") {
    auto s = setup(build_model("friedrichs", {{"N", "256"}, {"L", "64"}}), {0.0, 2.0, 3.0, 9});
    const CMat& Q = s.pair.Phi[0].m;
    for (const auto& psi : s.states)
        for (const auto& phi : s.states)
            CHECK(rel_gap(tf_matrix_element(s.tf, psi, phi), psi.dot(Q * phi)) < 1e-8);
    CHECK(ccr_residual(s.tf, s.states).max_residual < 1e-8);
}

TEST_CASE("2cos model: T_f equals the symmetrised Q (H')^-1 with H' = i S* - i S") {
    const int N = 256;
    auto s = setup(build_convolution_zd(two_cos(N)), {0.0, 0.2, 1.4, 21});
    const CMat& Q = s.pair.Phi[0].m;
    RVec x = Q.diagonal().real();
    // cyclic shift (S psi)(x) = psi(x - 1), built from the site positions
    CMat S = CMat::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (std::abs(std::remainder(x(i) - x(j) - 1.0, static_cast<double>(N))) < 1e-9) S(i, j) = 1.0;
    CMat hp = I1 * S.adjoint() - I1 * S;
    Eigen::SelfAdjointEigenSolver<CMat> es(hp);
    RVec inv = es.eigenvalues().unaryExpr([](double v) { return std::abs(v) > 1e-8 ? 1.0 / v : 0.0; });
    CMat G = es.eigenvectors() * inv.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    CMat T = 0.5 * (Q * G + G * Q);
    for (const auto& psi : s.states)
        for (const auto& phi : s.states) CHECK(rel_gap(tf_matrix_element(s.tf, psi, phi), psi.dot(T * phi)) < 1e-6);
    CHECK(hermiticity_defect(s.tf, s.states) < 1e-8);
}

TEST_CASE("form route agrees with the compressed matrix") {
    auto s = setup(build_convolution_zd(two_cos(256)), {0.0, 0.2, 1.4, 21});
    LocalisationProfile prof;
    for (const auto& phi : s.states)
        CHECK(rel_gap(eval_tf_form(s.pair, s.js, s.lay, prof, phi), tf_matrix_element(s.tf, phi, phi)) < 1e-8);
}
