#pragma once

#include <functional>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace tempo {

enum class ProfileKind { RadialPlateau, ProductPlateau, IndicatorBall, Custom };

std::string to_string(ProfileKind k);
ProfileKind profile_kind_from_string(const std::string& s);

struct LocalisationProfile {
    int d = 1;
    ProfileKind kind = ProfileKind::RadialPlateau;
    double plateau_radius = 1.0;
    double decay_scale = 1.0;
    int smooth_order = 5;
    double rho = 2.0;

    // only for Custom
    std::function<double(const RVec&)> custom_f;
    std::function<RVec(const RVec&)> custom_grad;

    bool radial() const { return kind == ProfileKind::RadialPlateau || kind == ProfileKind::IndicatorBall; }
    bool differentiable() const;
};

// one-dimensional plateau h and h'
double plateau_h(const LocalisationProfile& p, double s);
double plateau_dh(const LocalisationProfile& p, double s);

double eval_f(const LocalisationProfile& p, const RVec& x);
RVec eval_f_grad(const LocalisationProfile& p, const RVec& x);

struct RfValue {
    double value = 0.0;
    double quadrature_error_estimate = 0.0;
};

RfValue eval_Rf(const LocalisationProfile& p, const RVec& x, double tol = 1e-13);
RVec eval_Rf_grad(const LocalisationProfile& p, const RVec& x);
RVec eval_Rf_grad_quadrature(const LocalisationProfile& p, const RVec& x, RVec* err = nullptr);
RMat eval_Rf_hessian(const LocalisationProfile& p, const RVec& x);

struct ProfileValidation {
    bool even = true;
    bool plateau = true;
    bool decays = true;
    double decay_constant = 0.0;
    std::string message;
    bool ok() const { return even && plateau && decays; }
};

ProfileValidation validate_profile(const LocalisationProfile& p);
// throws NotEven / BadProfile
void require_valid(const LocalisationProfile& p);

struct HomogeneityRow {
    int order = 0;
    double t = 1.0;
    RVec x;
    double residual = 0.0;
};

struct HomogeneityReport {
    std::vector<HomogeneityRow> rows;
    double max_residual[3] = {0.0, 0.0, 0.0};
    double max_euler = 0.0;
};

HomogeneityReport check_homogeneity(const LocalisationProfile& p, const std::vector<RVec>& xs,
                                    const std::vector<double>& ts, int max_order = 2);

}  // namespace tempo
