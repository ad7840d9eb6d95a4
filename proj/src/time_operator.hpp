#pragma once

#include <vector>

#include "linalg.hpp"
#include "localisation.hpp"
#include "models.hpp"
#include "spectral.hpp"

namespace tempo {

// T_f compressed to the range of a spectral filter, expressed in joint-basis columns V.
struct TimeOperatorForm {
    CMat V;
    std::vector<Index> columns;
    RVec lambda;
    RMat hp;     // n x d velocity tuples
    RMat k;      // grad R_f at H'
    RMat khat;   // grad R_f at H'/|H'|
    RVec third;  // sum_j khat_j (H''H')_j / |H'|^3
    std::vector<CMat> W;  // V* Phi_j V
    CMat Tc;
    CMat Tsimple;  // -1/2 (Phi.R_f'(H') + R_f'(H').Phi)
    bool radial = false;
    bool form_only = false;
    LocalisationProfile profile;
    SpectralFilter filter;

    Index size() const { return V.cols(); }
    CVec coords(const CVec& phi) const { return V.adjoint() * phi; }
};

TimeOperatorForm build_Tf(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                          const LocalisationProfile& profile, const SpectralFilter& filter, bool radial_branch);

// Independent form route: -1/2 sum_j (<Phi_j psi, K_j phi> + <K_j psi, Phi_j phi>), K_j = (d_j R_f)(H').
cplx eval_tf_form(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                  const LocalisationProfile& profile, const CVec& phi, const CVec* psi = nullptr);

// <psi, T phi> through the compressed matrix.
cplx tf_matrix_element(const TimeOperatorForm& tf, const CVec& psi, const CVec& phi);

struct StateCheck {
    double max_residual = 0.0;
    std::vector<double> residuals;
};

StateCheck ccr_residual(const TimeOperatorForm& tf, const std::vector<CVec>& states);
StateCheck form_identity(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                         const TupleLayout& layout, const std::vector<CVec>& states);
// |S*(T - T*)S| over the span of the given states
double hermiticity_defect(const TimeOperatorForm& tf, const std::vector<CVec>& states);
double compare_on_states(const CMat& a, const CMat& b, const TimeOperatorForm& tf, const std::vector<CVec>& states);

// Full T V (N x n) for the Weyl relation.
CMat apply_full(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                const TupleLayout& layout);

struct WeylReport {
    std::vector<double> t;
    std::vector<double> residual;
    double max_ratio = 0.0;  // max residual / (1 + t)
};

WeylReport weyl_residual(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                         const TupleLayout& layout, const std::vector<double>& t_grid, const std::vector<CVec>& states);

struct SpectralDerivativeReport {
    double relative_error = 0.0;
    double max_abs_error = 0.0;
    int branches = 0;
    std::vector<cplx> lhs;  // spectral-representation values
    std::vector<cplx> rhs;  // <psi, T phi>
};

SpectralDerivativeReport spectral_derivative_check(const OperatorPair& pair, const JointSpectralData& data,
                                                   const TimeOperatorForm& tf,
                                                   const std::vector<std::pair<CVec, CVec>>& state_pairs);

// Filtered localized packets used as test states: seeds with random centers and momenta in the interior.
std::vector<CVec> filtered_test_states(const OperatorPair& pair, const JointSpectralData& data, int h_index,
                                       const CriticalSetEstimate& kappa, const SpectralFilter& filter, int count,
                                       std::uint64_t seed, double width = 0.0, double center_spread = 0.0);

}  // namespace tempo
