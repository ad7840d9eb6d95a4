#include "localisation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tempo {

namespace {

constexpr double kTailScales = 8.0;

using boost::math::quadrature::gauss_kronrod;

// Bisection on the Kronrod error estimate, relative to the L1 norm so cancelling pieces terminate.
double gk_rec(const std::function<double(double)>& f, double a, double b, double tol, int depth, double* err) {
    double e = 0.0, l1 = 0.0;
    double v = gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &e, &l1);
    if (depth == 0 || e <= tol * l1 || e <= 1e-300) {
        if (err) *err += e;
        return v;
    }
    double m = 0.5 * (a + b);
    return gk_rec(f, a, m, tol, depth - 1, err) + gk_rec(f, m, b, tol, depth - 1, err);
}

double gk(const std::function<double(double)>& f, double a, double b, double tol, double* err) {
    return gk_rec(f, a, b, std::max(tol, 1e-12), 14, err);
}

double piecewise(const std::function<double(double)>& f, std::vector<double> pts, double tol, double* err) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double s = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1] > pts[i]) s += gk(f, pts[i], pts[i + 1], tol, err);
    return s;
}

// Breakpoints along the ray mu -> mu*x plus where the integrand starts and stops.
struct Ray {
    std::vector<double> breaks;
    double start = 0.0;
    double end = 0.0;
};

Ray ray_for(const LocalisationProfile& p, const RVec& x) {
    Ray ray;
    const double r0 = p.plateau_radius, w = p.decay_scale;
    if (p.kind == ProfileKind::ProductPlateau) {
        double mx = x.cwiseAbs().maxCoeff();
        for (Index j = 0; j < x.size(); ++j) {
            double a = std::abs(x(j));
            if (a == 0.0) continue;
            ray.breaks.push_back(r0 / a);
            ray.breaks.push_back((r0 + w) / a);
        }
        ray.start = r0 / mx;
        ray.end = (r0 + kTailScales * w) / mx;
    } else {
        double nx = x.norm();
        ray.start = r0 / nx;
        ray.breaks.push_back(r0 / nx);
        if (p.kind == ProfileKind::RadialPlateau) {
            ray.breaks.push_back((r0 + w) / nx);
            ray.end = (r0 + kTailScales * w) / nx;
        } else {
            ray.end = r0 / nx;
        }
    }
    // stop where the Gaussian tail has fallen below double resolution
    ray.breaks.erase(std::remove_if(ray.breaks.begin(), ray.breaks.end(),
                                    [&](double b) { return b > ray.end; }),
                     ray.breaks.end());
    return ray;
}

void check_point(const LocalisationProfile& p, const RVec& x) {
    if (x.size() != p.d) throw Error("BadDimension", "point dimension does not match profile");
    if (x.norm() == 0.0) throw Error("SingularAtOrigin", "R_f is not defined at x = 0");
}

}  // namespace

std::string to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::RadialPlateau: return "radial_plateau";
        case ProfileKind::ProductPlateau: return "product_plateau";
        case ProfileKind::IndicatorBall: return "indicator_ball";
        case ProfileKind::Custom: return "custom";
    }
    return "?";
}

ProfileKind profile_kind_from_string(const std::string& s) {
    if (s == "radial_plateau") return ProfileKind::RadialPlateau;
    if (s == "product_plateau") return ProfileKind::ProductPlateau;
    if (s == "indicator_ball") return ProfileKind::IndicatorBall;
    if (s == "custom") return ProfileKind::Custom;
    throw Error("ConfigError", "unknown profile kind '" + s + "'");
}

bool LocalisationProfile::differentiable() const {
    if (kind == ProfileKind::IndicatorBall) return false;
    if (kind == ProfileKind::Custom) return static_cast<bool>(custom_grad);
    return true;
}

double plateau_h(const LocalisationProfile& p, double s) {
    const double r0 = p.plateau_radius;
    if (s <= r0) return 1.0;
    double u = (s - r0) / p.decay_scale;
    double S = smoothstep(p.smooth_order, u);
    return (1.0 - S) + S * std::exp(-u * u);
}

double plateau_dh(const LocalisationProfile& p, double s) {
    const double r0 = p.plateau_radius, w = p.decay_scale;
    if (s <= r0) return 0.0;
    double u = (s - r0) / w;
    double S = smoothstep(p.smooth_order, u);
    double dS = smoothstep_deriv(p.smooth_order, u) / w;
    double g = std::exp(-u * u);
    return -dS + dS * g + S * (-2.0 * u / w) * g;
}

double eval_f(const LocalisationProfile& p, const RVec& x) {
    switch (p.kind) {
        case ProfileKind::RadialPlateau: return plateau_h(p, x.norm());
        case ProfileKind::ProductPlateau: {
            double f = 1.0;
            for (Index j = 0; j < x.size(); ++j) f *= plateau_h(p, std::abs(x(j)));
            return f;
        }
        case ProfileKind::IndicatorBall: return x.norm() <= p.plateau_radius ? 1.0 : 0.0;
        case ProfileKind::Custom:
            if (!p.custom_f) throw Error("BadProfile", "custom profile without a function");
            return p.custom_f(x);
    }
    return 0.0;
}

RVec eval_f_grad(const LocalisationProfile& p, const RVec& x) {
    RVec g = RVec::Zero(x.size());
    switch (p.kind) {
        case ProfileKind::RadialPlateau: {
            double s = x.norm();
            if (s > 0.0) g = plateau_dh(p, s) / s * x;
            return g;
        }
        case ProfileKind::ProductPlateau: {
            for (Index j = 0; j < x.size(); ++j) {
                double a = std::abs(x(j));
                double v = a == 0.0 ? 0.0 : plateau_dh(p, a) * (x(j) > 0 ? 1.0 : -1.0);
                for (Index k = 0; k < x.size(); ++k)
                    if (k != j) v *= plateau_h(p, std::abs(x(k)));
                g(j) = v;
            }
            return g;
        }
        case ProfileKind::IndicatorBall: throw Error("NonDifferentiable", "indicator_ball has no gradient");
        case ProfileKind::Custom:
            if (!p.custom_grad) throw Error("NonDifferentiable", "custom profile without a gradient");
            return p.custom_grad(x);
    }
    return g;
}

RfValue eval_Rf(const LocalisationProfile& p, const RVec& x, double tol) {
    check_point(p, x);
    RfValue out;
    auto integrand = [&](double mu) {
        double chi = mu <= 1.0 ? 1.0 : 0.0;
        return (eval_f(p, mu * x) - chi) / mu;
    };
    if (p.kind == ProfileKind::Custom) {
        double err = 0.0;
        double head = gk([&](double mu) { return mu <= 0.0 ? 0.0 : integrand(mu); }, 0.0, 1.0, tol, &err);
        boost::math::quadrature::exp_sinh<double> tail;
        double e2 = 0.0;
        double t = tail.integrate([&](double mu) { return integrand(1.0 + mu); }, tol, &e2);
        out.value = head + t;
        out.quadrature_error_estimate = err + e2;
        return out;
    }
    Ray ray = ray_for(p, x);
    std::vector<double> pts = ray.breaks;
    pts.push_back(std::min(ray.start, 1.0));
    pts.push_back(std::max(ray.end, 1.0));
    pts.push_back(1.0);
    double lo = std::min(ray.start, 1.0);
    pts.erase(std::remove_if(pts.begin(), pts.end(), [&](double b) { return b < lo; }), pts.end());
    double err = 0.0;
    out.value = piecewise(integrand, pts, tol, &err);
    out.quadrature_error_estimate = err;
    return out;
}

RVec eval_Rf_grad_quadrature(const LocalisationProfile& p, const RVec& x, RVec* err) {
    check_point(p, x);
    if (!p.differentiable()) throw Error("NonDifferentiable", to_string(p.kind) + " has no gradient");
    RVec g(x.size());
    if (err) err->setZero(x.size());
    for (Index j = 0; j < x.size(); ++j) {
        auto integrand = [&](double mu) { return eval_f_grad(p, mu * x)(j); };
        double e = 0.0;
        if (p.kind == ProfileKind::Custom) {
            boost::math::quadrature::exp_sinh<double> tail;
            double head = gk(integrand, 0.0, 1.0, 1e-13, &e);
            double e2 = 0.0;
            g(j) = head + tail.integrate([&](double mu) { return integrand(1.0 + mu); }, 1e-13, &e2);
            e += e2;
        } else {
            Ray ray = ray_for(p, x);
            std::vector<double> pts = ray.breaks;
            pts.push_back(ray.start);
            pts.push_back(ray.end);
            g(j) = piecewise(integrand, pts, 1e-14, &e);
        }
        if (err) (*err)(j) = e;
    }
    return g;
}

RVec eval_Rf_grad(const LocalisationProfile& p, const RVec& x) {
    check_point(p, x);
    if (!p.differentiable()) throw Error("NonDifferentiable", to_string(p.kind) + " has no gradient");
    if (p.kind == ProfileKind::RadialPlateau) return -x / x.squaredNorm();
    return eval_Rf_grad_quadrature(p, x);
}

RMat eval_Rf_hessian(const LocalisationProfile& p, const RVec& x) {
    check_point(p, x);
    const Index d = x.size();
    if (p.kind == ProfileKind::RadialPlateau) {
        double n2 = x.squaredNorm();
        return -RMat::Identity(d, d) / n2 + 2.0 * x * x.transpose() / (n2 * n2);
    }
    const double h = 1e-4 * x.norm();
    RMat hess(d, d);
    for (Index k = 0; k < d; ++k) {
        auto diff = [&](double step) {
            RVec xp = x, xm = x;
            xp(k) += step;
            xm(k) -= step;
            return RVec((eval_Rf_grad(p, xp) - eval_Rf_grad(p, xm)) / (2.0 * step));
        };
        hess.col(k) = (4.0 * diff(h / 2) - diff(h)) / 3.0;
    }
    return 0.5 * (hess + hess.transpose());
}

ProfileValidation validate_profile(const LocalisationProfile& p) {
    ProfileValidation v;
    std::ostringstream msg;
    if (p.d < 1) throw Error("BadProfile", "dimension must be positive");
    if (!(p.plateau_radius > 0.0) || !(p.decay_scale > 0.0) || !(p.rho > 0.0))
        throw Error("BadProfile", "plateau_radius, decay_scale and rho must be positive");
    if (p.smooth_order < 3 || p.smooth_order % 2 == 0) throw Error("BadProfile", "smooth_order must be odd and >= 3");
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int i = 0; i < 400; ++i) {
        RVec dir(p.d);
        for (int j = 0; j < p.d; ++j) dir(j) = nd(rng);
        dir.normalize();
        double rad = 60.0 * p.plateau_radius * std::pow(ud(rng), 2.0);
        RVec x = rad * dir;
        double a = eval_f(p, x), b = eval_f(p, RVec(-x));
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
            v.even = false;
            msg << "f(x) != f(-x) at |x|=" << rad << "; ";
            break;
        }
    }
    for (int i = 0; i < 100; ++i) {
        RVec dir(p.d);
        for (int j = 0; j < p.d; ++j) dir(j) = nd(rng);
        dir.normalize();
        RVec x = p.plateau_radius * ud(rng) * 0.999 * dir;
        if (std::abs(eval_f(p, x) - 1.0) > 1e-12) {
            v.plateau = false;
            msg << "f != 1 inside plateau; ";
            break;
        }
    }
    double cmax = 0.0, tail = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double rad = 0.1 * p.plateau_radius * std::pow(1.05, i);
        RVec x = RVec::Zero(p.d);
        x(0) = rad;
        double val = std::abs(eval_f(p, x)) * std::pow(1.0 + rad * rad, p.rho / 2.0);
        cmax = std::max(cmax, val);
        if (i >= 180) tail = std::max(tail, val);
    }
    v.decay_constant = cmax;
    if (!std::isfinite(cmax) || (tail > cmax * (1.0 - 1e-12) && tail > 0.0)) {
        v.decays = false;
        msg << "no <x>^-rho decay; ";
    }
    v.message = msg.str();
    return v;
}

void require_valid(const LocalisationProfile& p) {
    ProfileValidation v = validate_profile(p);
    if (!v.even) throw Error("NotEven", v.message);
    if (!v.ok()) throw Error("BadProfile", v.message);
}

HomogeneityReport check_homogeneity(const LocalisationProfile& p, const std::vector<RVec>& xs,
                                    const std::vector<double>& ts, int max_order) {
    HomogeneityReport rep;
    auto grad = [&](const RVec& x) -> RVec {
        if (p.radial()) return eval_Rf_grad(p, x);
        const double h = 1e-4 * x.norm();
        RVec g(x.size());
        for (Index k = 0; k < x.size(); ++k) {
            auto diff = [&](double step) {
                RVec xp = x, xm = x;
                xp(k) += step;
                xm(k) -= step;
                return (eval_Rf(p, xp).value - eval_Rf(p, xm).value) / (2.0 * step);
            };
            g(k) = (4.0 * diff(h / 2) - diff(h)) / 3.0;
        }
        return g;
    };
    for (const RVec& x : xs) {
        if (p.differentiable()) {
            RVec g = p.radial() ? eval_Rf_grad(p, x) : eval_Rf_grad_quadrature(p, x);
            rep.max_euler = std::max(rep.max_euler, std::abs(x.dot(g) + 1.0));
        }
        for (double t : ts) {
            RVec tx = t * x;
            for (int order = 0; order <= max_order; ++order) {
                double res = 0.0;
                if (order == 0) {
                    res = std::abs(eval_Rf(p, tx).value + std::log(t) - eval_Rf(p, x).value);
                } else if (order == 1) {
                    res = (t * grad(tx) - grad(x)).cwiseAbs().maxCoeff();
                } else {
                    res = (t * t * eval_Rf_hessian(p, tx) - eval_Rf_hessian(p, x)).cwiseAbs().maxCoeff();
                }
                rep.rows.push_back({order, t, x, res});
                rep.max_residual[order] = std::max(rep.max_residual[order], res);
            }
        }
    }
    return rep;
}

}  // namespace tempo
