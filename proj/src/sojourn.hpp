#pragma once

#include <atomic>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "localisation.hpp"
#include "models.hpp"
#include "spectral.hpp"

namespace tempo {

struct SojournConfig {
    double abs_tol = 1e-8;     // times |phi|^2
    double tail_tol = 1e-4;
    double t_budget = 2000.0;  // hard limit when no revival cap applies
    double chunk = 0.0;        // 0 selects the span / 64
    bool box_guard = true;
};

struct SojournResult {
    double r = 0.0;
    double I_r = 0.0;
    double t_max_used = 0.0;
    double tail_estimate = 0.0;
    double quadrature_error = 0.0;
    double cap = 0.0;
    double max_imag = 0.0;
    bool converged = true;
    bool capped = false;
    long evaluations = 0;
};

struct ConvergenceTable {
    std::vector<SojournResult> rows;
    double extrapolated = 0.0;
    double p = 1.0;
    double c = 0.0;
    double fit_residual = 0.0;
    std::string extrapolation_model = "power_fit";  // tail_power | power_fit
    double fit_all_rows = 0.0;                      // limit of the least-squares fit over every row
    double target = 0.0;
    double relative_gap = 0.0;
};

// Time evolution of a fixed state restricted to its spectral support, read out in the eigenbasis of Phi.
class SojournEvaluator {
public:
    SojournEvaluator(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                     const CVec& phi);

    // g(t) = <phi, e^{-itH} F e^{itH} phi> - <phi, e^{itH} F e^{-itH} phi> for the weights F
    cplx integrand(double t, const RVec& weights) const;
    RVec weights(const LocalisationProfile& profile, double r) const;

    double revival_cap() const { return cap_; }
    double norm_sq() const { return norm_sq_; }
    double packet_width() const;
    double box_extent() const { return box_; }
    long evaluations() const { return evals_.load(); }

private:
    CMat M_;
    CVec a_;
    RVec lam_;
    RMat pos_;
    RVec prob_;
    double cap_ = 0.0;
    double norm_sq_ = 0.0;
    double box_ = 0.0;
    mutable std::atomic<long> evals_{0};
};

SojournResult sojourn_integral(const SojournEvaluator& ev, const LocalisationProfile& profile, double r,
                               const SojournConfig& cfg = {});

struct PowerFit {
    double I_inf = 0.0;
    double c = 0.0;
    double p = 1.0;
    double residual = 0.0;
};

PowerFit power_fit(const std::vector<double>& r, const std::vector<double>& I);
// Exact I_inf + c r^-p through the last three rows; false unless the differences share a sign and shrink.
bool tail_fit(const std::vector<double>& r, const std::vector<double>& I, PowerFit& out);

// Rows are independent; jobs > 1 evaluates them concurrently and assembles them in r order.
ConvergenceTable sojourn_sweep(const SojournEvaluator& ev, const LocalisationProfile& profile,
                               const std::vector<double>& r_list, double target, const SojournConfig& cfg = {},
                               int jobs = 1);

}  // namespace tempo
