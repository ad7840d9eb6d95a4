#include "sojourn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <sstream>

namespace tempo {

SojournEvaluator::SojournEvaluator(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                                   const CVec& phi) {
    const int d = pair.d();
    if (!pair.phi_is_diagonal() && d > 1) throw Error("UnsupportedModel", "non-diagonal Phi with d > 1");
    CVec c = data.basis.adjoint() * phi;
    double cn = c.norm();
    norm_sq_ = phi.squaredNorm();
    std::vector<Index> keep;
    for (Index i = 0; i < c.size(); ++i)
        if (std::abs(c(i)) > 1e-15 * cn) keep.push_back(i);
    const Index n = static_cast<Index>(keep.size());
    CMat u(data.basis.rows(), n);
    a_.resize(n);
    lam_.resize(n);
    for (Index i = 0; i < n; ++i) {
        u.col(i) = data.basis.col(keep[i]);
        a_(i) = c(keep[i]);
        lam_(i) = data.table(keep[i], layout.h);
    }
    CVec site_phi;
    if (pair.phi_is_diagonal()) {
        M_ = std::move(u);
        pos_.resize(pair.dim(), d);
        for (int j = 0; j < d; ++j) pos_.col(j) = pair.phi_diag[j];
        site_phi = phi;
    } else {
        Eigensystem es = eigh(pair.Phi[0]);
        M_ = es.vectors.adjoint() * u;
        pos_ = es.values;
        site_phi = es.vectors.adjoint() * phi;
    }
    prob_ = site_phi.cwiseAbs2();
    cap_ = std::numeric_limits<double>::infinity();
    box_ = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        double period = pair.period.size() > j ? pair.period(j) : 0.0;
        if (period > 0.0) {
            double vmax = 0.0;
            for (Index k : keep) vmax = std::max(vmax, std::abs(data.table(k, layout.hp[j])));
            if (vmax > 0.0) cap_ = std::min(cap_, 0.5 * period / vmax);
            box_ = std::min(box_, period);
        } else {
            box_ = std::min(box_, pos_.col(j).maxCoeff() - pos_.col(j).minCoeff());
        }
    }
}

RVec SojournEvaluator::weights(const LocalisationProfile& profile, double r) const {
    RVec w(pos_.rows());
    for (Index i = 0; i < pos_.rows(); ++i) w(i) = eval_f(profile, RVec(pos_.row(i).transpose() / r));
    return w;
}

double SojournEvaluator::packet_width() const {
    double tot = prob_.sum();
    double worst = 0.0;
    for (Index j = 0; j < pos_.cols(); ++j) {
        double mean = prob_.dot(pos_.col(j)) / tot;
        double var = prob_.dot((pos_.col(j).array() - mean).square().matrix()) / tot;
        worst = std::max(worst, std::sqrt(var));
    }
    return worst;
}

cplx SojournEvaluator::integrand(double t, const RVec& w) const {
    ++evals_;
    CVec eb(a_.size()), ef(a_.size());
    for (Index i = 0; i < a_.size(); ++i) {
        cplx ph = std::polar(1.0, t * lam_(i));
        eb(i) = ph * a_(i);
        ef(i) = std::conj(ph) * a_(i);
    }
    CVec back = M_ * eb;   // e^{itH} phi
    CVec fwd = M_ * ef;    // e^{-itH} phi
    cplx g = 0.0;
    for (Index i = 0; i < back.size(); ++i) {
        if (w(i) == 0.0) continue;
        g += std::conj(back(i)) * (w(i) * back(i)) - std::conj(fwd(i)) * (w(i) * fwd(i));
    }
    return g;
}

namespace {

struct Adaptive {
    std::function<double(double)> f;
    double err = 0.0;
    double max_abs = 0.0;
    int max_depth = 40;

    double eval(double t) {
        double v = f(t);
        max_abs = std::max(max_abs, std::abs(v));
        return v;
    }

    double rec(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        double flm = eval(lm), frm = eval(rm);
        double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        double diff = left + right - whole;
        if (depth >= max_depth || std::abs(diff) <= 15.0 * tol) {
            err += std::abs(diff) / 15.0;
            return left + right + diff / 15.0;
        }
        return rec(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + rec(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }

    double integrate(double a, double b, double tol, int panels) {
        double s = 0.0;
        double h = (b - a) / panels;
        for (int i = 0; i < panels; ++i) {
            double x0 = a + i * h, x1 = x0 + h, xm = 0.5 * (x0 + x1);
            double f0 = eval(x0), fm = eval(xm), f1 = eval(x1);
            double whole = h / 6.0 * (f0 + 4.0 * fm + f1);
            s += rec(x0, x1, f0, fm, f1, whole, tol / panels, 0);
        }
        return s;
    }
};

}  // namespace

SojournResult sojourn_integral(const SojournEvaluator& ev, const LocalisationProfile& profile, double r,
                               const SojournConfig& cfg) {
    if (!(r > 0.0)) throw Error("DomainError", "r must be positive");
    require_valid(profile);
    SojournResult res;
    res.r = r;
    res.cap = ev.revival_cap();
    if (ev.norm_sq() == 0.0) return res;
    if (cfg.box_guard) {
        double limit = ev.box_extent() / (4.0 * ev.packet_width());
        if (r > limit) {
            std::ostringstream os;
            os << "r = " << r << " exceeds box/(4 width) = " << limit;
            throw Error("BoxGuardViolated", os.str());
        }
    }
    const bool capped = std::isfinite(res.cap);
    const double t_end = capped ? std::min(res.cap, cfg.t_budget) : cfg.t_budget;
    const double chunk = cfg.chunk > 0.0 ? cfg.chunk : (capped ? t_end / 64.0 : 1.0);
    const double tol = cfg.abs_tol * ev.norm_sq();
    const double floor = 1e-13 * ev.norm_sq();
    RVec w = ev.weights(profile, r);
    long count = 0;

    Adaptive ad;
    ad.f = [&](double t) {
        ++count;
        cplx g = ev.integrand(t, w);
        res.max_imag = std::max(res.max_imag, std::abs(g.imag()));
        return g.real();
    };
    double integral = 0.0, gmax = 0.0;
    std::vector<double> chunk_max;
    double t = 0.0;
    bool decayed = false;
    while (t < t_end - 1e-12) {
        double b = std::min(t + chunk, t_end);
        ad.max_abs = 0.0;
        integral += ad.integrate(t, b, tol * (b - t) / t_end, 4);
        chunk_max.push_back(ad.max_abs);
        gmax = std::max(gmax, ad.max_abs);
        t = b;
        size_t k = chunk_max.size();
        if (k >= 3) {
            double lim = std::max(cfg.tail_tol * gmax, floor);
            if (chunk_max[k - 1] < lim && chunk_max[k - 2] < lim) {
                decayed = true;
                break;
            }
        }
    }
    double g_end = ad.f(t);
    res.t_max_used = t;
    res.quadrature_error = 0.5 * ad.err;
    size_t k = chunk_max.size();
    double m2 = k ? chunk_max[k - 1] : 0.0, m1 = k > 1 ? chunk_max[k - 2] : 0.0;
    double tail_signed = 0.0;
    if (m2 > 0.0 && m1 > m2) {
        double rate = std::log(m1 / m2) / chunk;
        res.tail_estimate = 0.5 * m2 / rate;
        tail_signed = 0.5 * g_end / rate;
    } else {
        res.tail_estimate = 0.5 * m2 * chunk;
    }
    res.I_r = 0.5 * integral + tail_signed;
    if (!decayed) {
        res.capped = capped;
        if (m2 > 1e-2 * gmax && m2 > floor) {
            std::ostringstream os;
            os << "integrand at t = " << t << " still " << m2 / gmax << " of its maximum (r = " << r << ")";
            throw Error("TailNotDecaying", os.str());
        }
    }
    res.converged = res.tail_estimate <= 0.01 * std::abs(res.I_r) || res.tail_estimate <= floor;
    res.evaluations = count;
    return res;
}

PowerFit power_fit(const std::vector<double>& r, const std::vector<double>& I) {
    const size_t n = r.size();
    if (n < 4 || I.size() != n) throw Error("FitIllConditioned", "power fit needs at least 4 rows");
    auto solve = [&](double p, PowerFit& out) {
        double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
        for (size_t i = 0; i < n; ++i) {
            double x = std::pow(r[i], -p);
            s1 += 1.0;
            sx += x;
            sxx += x * x;
            sy += I[i];
            sxy += x * I[i];
        }
        double det = s1 * sxx - sx * sx;
        double tr = s1 + sxx;
        if (!(det > 1e-14 * tr * tr)) return false;
        out.I_inf = (sxx * sy - sx * sxy) / det;
        out.c = (s1 * sxy - sx * sy) / det;
        out.p = p;
        double rs = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double e = I[i] - out.I_inf - out.c * std::pow(r[i], -p);
            rs += e * e;
        }
        out.residual = rs;
        return std::isfinite(out.I_inf) && std::isfinite(out.c);
    };
    const double lo = std::log(0.05), hi = std::log(20.0);
    const int grid = 400;
    PowerFit best;
    bool any = false;
    double best_lp = 0.0, worst = 0.0;
    for (int i = 0; i <= grid; ++i) {
        double lp = lo + (hi - lo) * i / grid;
        PowerFit f;
        if (!solve(std::exp(lp), f)) continue;
        worst = std::max(worst, f.residual);
        if (!any || f.residual < best.residual) {
            best = f;
            best_lp = lp;
            any = true;
        }
    }
    if (!any) throw Error("FitIllConditioned", "no admissible exponent");
    double scale = 0.0;
    for (double v : I) scale = std::max(scale, v * v);
    if (worst - best.residual <= 1e-28 * std::max(scale, 1e-300) * n) {
        PowerFit f;
        if (solve(1.0, f)) return f;
        return best;
    }
    double a = std::max(lo, best_lp - (hi - lo) / grid), b = std::min(hi, best_lp + (hi - lo) / grid);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        PowerFit f1, f2;
        bool ok1 = solve(std::exp(x1), f1), ok2 = solve(std::exp(x2), f2);
        if (!ok1 || !ok2) break;
        if (f1.residual < f2.residual) b = x2; else a = x1;
        PowerFit& cand = f1.residual < f2.residual ? f1 : f2;
        if (cand.residual < best.residual) best = cand;
    }
    return best;
}

bool tail_fit(const std::vector<double>& r, const std::vector<double>& I, PowerFit& out) {
    const size_t n = r.size();
    if (n < 3 || I.size() != n) return false;
    const double r1 = r[n - 3], r2 = r[n - 2], r3 = r[n - 1];
    const double d1 = I[n - 2] - I[n - 3], d2 = I[n - 1] - I[n - 2];
    if (!(d1 * d2 > 0.0) || !(std::abs(d2) < std::abs(d1))) return false;
    const double q = d2 / d1;
    // ratio of successive differences, decreasing in p
    auto ratio = [&](double p) { return (std::pow(r3, -p) - std::pow(r2, -p)) / (std::pow(r2, -p) - std::pow(r1, -p)); };
    double lo = 0.05, hi = 20.0;
    double p;
    if (q >= ratio(lo)) {
        p = lo;
    } else if (q <= ratio(hi)) {
        p = hi;
    } else {
        for (int it = 0; it < 200; ++it) {
            double m = 0.5 * (lo + hi);
            (ratio(m) > q ? lo : hi) = m;
        }
        p = 0.5 * (lo + hi);
    }
    out.p = p;
    out.c = d2 / (std::pow(r3, -p) - std::pow(r2, -p));
    out.I_inf = I[n - 1] - out.c * std::pow(r3, -p);
    out.residual = 0.0;
    return std::isfinite(out.I_inf);
}

ConvergenceTable sojourn_sweep(const SojournEvaluator& ev, const LocalisationProfile& profile,
                               const std::vector<double>& r_list, double target, const SojournConfig& cfg, int jobs) {
    if (r_list.size() < 4) throw Error("FitIllConditioned", "r_list needs at least 4 entries");
    for (size_t i = 1; i < r_list.size(); ++i)
        if (!(r_list[i] > r_list[i - 1])) throw Error("ConfigError", "r_list must be ascending");
    ConvergenceTable tab;
    tab.rows.resize(r_list.size());
    if (jobs <= 1) {
        for (size_t i = 0; i < r_list.size(); ++i) tab.rows[i] = sojourn_integral(ev, profile, r_list[i], cfg);
    } else {
        for (size_t start = 0; start < r_list.size(); start += static_cast<size_t>(jobs)) {
            std::vector<std::future<SojournResult>> batch;
            for (size_t i = start; i < std::min(r_list.size(), start + static_cast<size_t>(jobs)); ++i)
                batch.push_back(std::async(std::launch::async, [&, i] { return sojourn_integral(ev, profile, r_list[i], cfg); }));
            for (size_t k = 0; k < batch.size(); ++k) tab.rows[start + k] = batch[k].get();
        }
    }
    std::vector<double> rs, is;
    for (const auto& row : tab.rows) {
        rs.push_back(row.r);
        is.push_back(row.I_r);
    }
    PowerFit all = power_fit(rs, is), f = all;
    tab.fit_all_rows = all.I_inf;
    tab.fit_residual = all.residual;
    if (tail_fit(rs, is, f)) tab.extrapolation_model = "tail_power";
    else f = all;
    tab.extrapolated = f.I_inf;
    tab.p = f.p;
    tab.c = f.c;
    tab.target = target;
    tab.relative_gap = std::abs(f.I_inf - target) / std::max(std::abs(target), 1e-12);
    return tab;
}

}  // namespace tempo
