#include "time_operator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace tempo {

namespace {

constexpr double kSingular = 1e-12;

RVec hp_tuple(const JointSpectralData& data, const TupleLayout& layout, Index col) {
    RVec x(layout.d);
    for (int j = 0; j < layout.d; ++j) x(j) = data.table(col, layout.hp[j]);
    return x;
}

RVec hpp_times_hp(const JointSpectralData& data, const TupleLayout& layout, Index col, const RVec& hp) {
    RVec out = RVec::Zero(layout.d);
    for (int j = 0; j < layout.d; ++j)
        for (int k = 0; k < layout.d; ++k) out(j) += data.table(col, layout.hpp[j * layout.d + k]) * hp(k);
    return out;
}

// Gradient of R_f, closed form on the radial branch, quadrature otherwise; cached per tuple.
class GradCache {
public:
    GradCache(const LocalisationProfile& p, bool radial) : p_(p), radial_(radial) {}

    RVec at(const RVec& x) {
        if (radial_) return -x / x.squaredNorm();
        std::vector<double> key(x.data(), x.data() + x.size());
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        RVec g = eval_Rf_grad_quadrature(p_, x);
        cache_.emplace(std::move(key), g);
        return g;
    }

private:
    const LocalisationProfile& p_;
    bool radial_;
    std::map<std::vector<double>, RVec> cache_;
};

CMat phi_times(const OperatorPair& pair, int j, const CMat& x) {
    if (pair.phi_is_diagonal()) return pair.phi_diag[j].cast<cplx>().asDiagonal() * x;
    return pair.Phi[j].m * x;
}

CMat coords_of(const TimeOperatorForm& tf, const std::vector<CVec>& states) {
    CMat s(tf.size(), static_cast<Index>(states.size()));
    for (size_t i = 0; i < states.size(); ++i) s.col(static_cast<Index>(i)) = tf.coords(states[i]);
    return s;
}

}  // namespace

TimeOperatorForm build_Tf(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                          const LocalisationProfile& profile, const SpectralFilter& filter, bool radial_branch) {
    filter.validate();
    if (!layout.has_hpp()) throw Error("DomainError", "H'' tuples are required for T_f");
    if (!radial_branch) require_valid(profile);
    TimeOperatorForm tf;
    tf.radial = radial_branch;
    tf.profile = profile;
    tf.filter = filter;
    const int d = layout.d;
    for (Index i = 0; i < data.size(); ++i)
        if (filter.eta(data.table(i, layout.h)) > 0.0) tf.columns.push_back(i);
    const Index n = static_cast<Index>(tf.columns.size());
    if (n == 0) throw Error("FilteredToZero", "filter range contains no spectrum");
    tf.V.resize(data.basis.rows(), n);
    tf.lambda.resize(n);
    tf.hp.resize(n, d);
    tf.k.resize(n, d);
    tf.khat.resize(n, d);
    tf.third.resize(n);
    GradCache grad(profile, radial_branch);
    RVec inv_abs(n);
    for (Index c = 0; c < n; ++c) {
        Index col = tf.columns[c];
        tf.V.col(c) = data.basis.col(col);
        tf.lambda(c) = data.table(col, layout.h);
        RVec x = hp_tuple(data, layout, col);
        double a = x.norm();
        if (a < kSingular) {
            std::ostringstream os;
            os << "velocity tuple of norm " << a << " at lambda " << tf.lambda(c) << " survived the filter";
            throw Error("SingularCalculus", os.str());
        }
        tf.hp.row(c) = x.transpose();
        RVec k = grad.at(x);
        RVec kh = grad.at(x / a);
        tf.k.row(c) = k.transpose();
        tf.khat.row(c) = kh.transpose();
        inv_abs(c) = 1.0 / a;
        tf.third(c) = kh.dot(hpp_times_hp(data, layout, col, x)) / (a * a * a);
    }
    tf.Tc = CMat::Zero(n, n);
    tf.Tsimple = CMat::Zero(n, n);
    for (int j = 0; j < d; ++j) {
        CMat w = tf.V.adjoint() * phi_times(pair, j, tf.V);
        w = 0.5 * (w + w.adjoint()).eval();
        CVec kj = tf.k.col(j).cast<cplx>();
        CVec khj = tf.khat.col(j).cast<cplx>();
        tf.Tc += w * kj.asDiagonal();
        tf.Tc += khj.asDiagonal() * w * inv_abs.cast<cplx>().asDiagonal();
        tf.Tsimple += w * kj.asDiagonal();
        tf.Tsimple += kj.asDiagonal() * w;
        tf.W.push_back(std::move(w));
    }
    tf.Tc.diagonal() += I1 * tf.third.cast<cplx>();
    tf.Tc *= -0.5;
    tf.Tsimple *= -0.5;
    return tf;
}

cplx eval_tf_form(const OperatorPair& pair, const JointSpectralData& data, const TupleLayout& layout,
                  const LocalisationProfile& profile, const CVec& phi, const CVec* psi_in) {
    const CVec& psi = psi_in ? *psi_in : phi;
    if (phi.norm() == 0.0 || psi.norm() == 0.0) return 0.0;
    const int d = layout.d;
    CVec c = data.basis.adjoint() * phi;
    CVec e = data.basis.adjoint() * psi;
    double cn = c.norm(), en = e.norm();
    RVec s = hprime_sq(data, layout);
    double smax = std::max(s.maxCoeff(), 1e-300);
    std::vector<Index> keep;
    for (Index i = 0; i < c.size(); ++i)
        if (std::abs(c(i)) > 1e-14 * cn || std::abs(e(i)) > 1e-14 * en) keep.push_back(i);
    const Index m = static_cast<Index>(keep.size());
    CMat U(data.basis.rows(), m);
    RMat k(m, d);
    for (Index i = 0; i < m; ++i) {
        Index col = keep[i];
        RVec x = hp_tuple(data, layout, col);
        if (x.norm() < kSingular) {
            std::ostringstream os;
            os << "state has weight on a velocity tuple of norm " << x.norm();
            throw Error("SingularCalculus", os.str());
        }
        if (s(col) <= 1e-10 * smax) throw Error("StateNotFiltered", "state support touches the (H')^2 kernel region");
        U.col(i) = data.basis.col(col);
        k.row(i) = eval_Rf_grad(profile, x).transpose();
    }
    CVec cs(m), es(m);
    for (Index i = 0; i < m; ++i) {
        cs(i) = c(keep[i]);
        es(i) = e(keep[i]);
    }
    cplx t = 0.0;
    for (int j = 0; j < d; ++j) {
        CVec kphi = U * (k.col(j).cast<cplx>().cwiseProduct(cs));
        CVec kpsi = U * (k.col(j).cast<cplx>().cwiseProduct(es));
        CVec phipsi = phi_times(pair, j, psi);
        CVec phiphi = phi_times(pair, j, phi);
        t += phipsi.dot(kphi) + kpsi.dot(phiphi);
    }
    return -0.5 * t;
}

cplx tf_matrix_element(const TimeOperatorForm& tf, const CVec& psi, const CVec& phi) {
    CVec a = tf.coords(phi), b = tf.coords(psi);
    return b.dot(tf.Tc * a);
}

StateCheck ccr_residual(const TimeOperatorForm& tf, const std::vector<CVec>& states) {
    StateCheck out;
    CMat s = coords_of(tf, states);
    CVec lam = tf.lambda.cast<cplx>();
    CMat c = tf.Tc * lam.asDiagonal();
    c -= lam.asDiagonal() * tf.Tc;
    CMat g = s.adjoint() * c * s;
    CMat gram = s.adjoint() * s;
    for (Index i = 0; i < g.rows(); ++i)
        for (Index j = 0; j < g.cols(); ++j) {
            double r = std::abs(g(i, j) - I1 * gram(i, j));
            out.residuals.push_back(r);
            out.max_residual = std::max(out.max_residual, r);
        }
    return out;
}

StateCheck form_identity(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                         const TupleLayout& layout, const std::vector<CVec>& states) {
    StateCheck out;
    for (const CVec& phi : states) {
        cplx a = tf_matrix_element(tf, phi, phi);
        cplx b = eval_tf_form(pair, data, layout, tf.profile, phi);
        double r = std::abs(a - b) / std::max(1.0, std::abs(b));
        out.residuals.push_back(r);
        out.max_residual = std::max(out.max_residual, r);
    }
    return out;
}

double hermiticity_defect(const TimeOperatorForm& tf, const std::vector<CVec>& states) {
    CMat s = coords_of(tf, states);
    return norm2(s.adjoint() * (tf.Tc - tf.Tc.adjoint()) * s);
}

double compare_on_states(const CMat& a, const CMat& b, const TimeOperatorForm& tf, const std::vector<CVec>& states) {
    CMat s = coords_of(tf, states);
    return norm2(s.adjoint() * (a - b) * s);
}

CMat apply_full(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                const TupleLayout& layout) {
    const int d = layout.d;
    const Index N = data.size();
    GradCache grad(tf.profile, tf.radial);
    RMat khat_all = RMat::Zero(N, d);
    for (Index i = 0; i < N; ++i) {
        RVec x = hp_tuple(data, layout, i);
        double a = x.norm();
        if (a < kSingular) continue;
        khat_all.row(i) = grad.at(x / a).transpose();
    }
    RVec inv_abs(tf.size());
    for (Index c = 0; c < tf.size(); ++c) inv_abs(c) = 1.0 / tf.hp.row(c).norm();
    CMat out = CMat::Zero(tf.V.rows(), tf.size());
    for (int j = 0; j < d; ++j) {
        CMat pv = phi_times(pair, j, tf.V);
        out += pv * tf.k.col(j).cast<cplx>().asDiagonal();
        CMat mid = data.basis.adjoint() * pv;
        mid = khat_all.col(j).cast<cplx>().asDiagonal() * mid;
        out += data.basis * mid * inv_abs.cast<cplx>().asDiagonal();
    }
    out += tf.V * (I1 * tf.third.cast<cplx>()).asDiagonal();
    return -0.5 * out;
}

WeylReport weyl_residual(const TimeOperatorForm& tf, const OperatorPair& pair, const JointSpectralData& data,
                         const TupleLayout& layout, const std::vector<double>& t_grid, const std::vector<CVec>& states) {
    WeylReport rep;
    CMat tv = apply_full(tf, pair, data, layout);
    CMat s = coords_of(tf, states);
    RVec lam_all = data.table.col(layout.h);
    CMat tva = tv * s;
    CMat u_tva = data.basis.adjoint() * tva;
    for (double t : t_grid) {
        CVec ph(tf.size());
        for (Index c = 0; c < tf.size(); ++c) ph(c) = std::polar(1.0, -t * tf.lambda(c));
        CVec ph_all(lam_all.size());
        for (Index c = 0; c < lam_all.size(); ++c) ph_all(c) = std::polar(1.0, -t * lam_all(c));
        CMat evolved = ph.asDiagonal() * s;
        CMat lhs = tv * evolved;
        CMat rhs = data.basis * (ph_all.asDiagonal() * u_tva) + t * (tf.V * evolved);
        double worst = 0.0;
        for (Index i = 0; i < s.cols(); ++i)
            worst = std::max(worst, (lhs.col(i) - rhs.col(i)).norm() / std::max(s.col(i).norm(), 1e-300));
        rep.t.push_back(t);
        rep.residual.push_back(worst);
        rep.max_ratio = std::max(rep.max_ratio, worst / (1.0 + t));
    }
    return rep;
}

SpectralDerivativeReport spectral_derivative_check(const OperatorPair& pair, const JointSpectralData& data,
                                                   const TimeOperatorForm& tf,
                                                   const std::vector<std::pair<CVec, CVec>>& state_pairs) {
    (void)data;
    if (!pair.exact || pair.d() != 1) throw Error("UnsupportedModel", "spectral representation needs a 1-d symbol");
    const SymbolData& sym = *pair.exact;
    const Index n = sym.m.size();
    double dmax = sym.dm.cwiseAbs().maxCoeff();
    if (dmax <= 1e-12 * std::max(1.0, sym.m.cwiseAbs().maxCoeff()))
        throw Error("UnsupportedModel", "constant symbol has no monotone branch");
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return sym.modes(a, 0) < sym.modes(b, 0); });
    double dxi = std::numeric_limits<double>::infinity();
    for (Index i = 1; i < n; ++i) {
        double s = sym.modes(order[i], 0) - sym.modes(order[i - 1], 0);
        if (s > 0.0) dxi = std::min(dxi, s);
    }
    auto sign = [&](Index c) {
        double v = sym.dm(c, 0);
        if (std::abs(v) <= 1e-12 * dmax) return 0;
        return v > 0 ? 1 : -1;
    };
    std::vector<std::vector<Index>> branches;
    std::vector<Index> cur;
    int cur_sign = 0;
    for (Index i : order) {
        int s = sign(i);
        if (s == 0 || s != cur_sign) {
            if (!cur.empty()) branches.push_back(cur);
            cur.clear();
            cur_sign = s;
            if (s == 0) continue;
        }
        cur.push_back(i);
    }
    if (!cur.empty()) branches.push_back(cur);
    if (sym.torus && branches.size() > 1 && sign(order.front()) != 0 && sign(order.back()) != 0 &&
        sign(order.front()) == sign(order.back()) && branches.front().front() == order.front() &&
        branches.back().back() == order.back()) {
        branches.front().insert(branches.front().begin(), branches.back().begin(), branches.back().end());
        branches.pop_back();
    }
    for (auto& b : branches)
        std::sort(b.begin(), b.end(), [&](Index a, Index c) { return sym.m(a) < sym.m(c); });

    SpectralDerivativeReport rep;
    rep.branches = static_cast<int>(branches.size());
    double max_rhs = 0.0;
    for (const auto& [psi, phi] : state_pairs) {
        CVec cphi = sym.basis.adjoint() * phi;
        CVec cpsi = sym.basis.adjoint() * psi;
        cplx total = 0.0;
        for (const auto& b : branches) {
            const Index m = static_cast<Index>(b.size());
            RVec lam(m), w(m);
            CVec up(m), us(m);
            for (Index i = 0; i < m; ++i) {
                lam(i) = sym.m(b[i]);
                w(i) = std::abs(sym.dm(b[i], 0)) * dxi;
                up(i) = cphi(b[i]) / std::sqrt(w(i));
                us(i) = cpsi(b[i]) / std::sqrt(w(i));
            }
            auto deriv = [&](Index i, Index s) -> cplx {
                double h1 = lam(i) - lam(i - s), h2 = lam(i + s) - lam(i);
                return -h2 / (h1 * (h1 + h2)) * up(i - s) + (h2 - h1) / (h1 * h2) * up(i) +
                       h1 / (h2 * (h1 + h2)) * up(i + s);
            };
            for (Index i = 0; i < m; ++i) {
                cplx du;
                if (i >= 2 && i + 2 < m) {
                    du = (4.0 * deriv(i, 1) - deriv(i, 2)) / 3.0;
                } else if (i >= 1 && i + 1 < m) {
                    du = deriv(i, 1);
                } else if (i + 1 < m) {
                    du = (up(i + 1) - up(i)) / (lam(i + 1) - lam(i));
                } else if (i >= 1) {
                    du = (up(i) - up(i - 1)) / (lam(i) - lam(i - 1));
                } else {
                    du = 0.0;
                }
                total += w(i) * std::conj(us(i)) * I1 * du;
            }
        }
        cplx rhs = tf_matrix_element(tf, psi, phi);
        rep.lhs.push_back(total);
        rep.rhs.push_back(rhs);
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(total - rhs));
        max_rhs = std::max(max_rhs, std::abs(rhs));
    }
    rep.relative_error = rep.max_abs_error / std::max(max_rhs, 1e-300);
    return rep;
}

std::vector<CVec> filtered_test_states(const OperatorPair& pair, const JointSpectralData& data, int h_index,
                                       const CriticalSetEstimate& kappa, const SpectralFilter& filter, int count,
                                       std::uint64_t seed, double width, double center_spread) {
    const int d = pair.d();
    RVec lo = RVec::Constant(d, std::numeric_limits<double>::infinity());
    RVec hi = -lo;
    for (Index g = 0; g < pair.dim(); ++g) {
        if (!pair.interior_mask[g]) continue;
        RVec x = pair.position(g);
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    RVec mid = 0.5 * (lo + hi), half = 0.25 * (hi - lo);
    if (center_spread > 0.0) half = half.cwiseMin(RVec::Constant(d, center_spread));
    double sp = pair.spacing.size() ? pair.spacing(0) : 1.0;
    if (width <= 0.0) width = 4.0 * sp;
    std::vector<Index> plateau;
    if (pair.exact)
        for (Index i = 0; i < data.size(); ++i)
            if (std::abs(data.table(i, h_index) - filter.center) <= filter.half_width) plateau.push_back(i);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<CVec> out;
    int attempts = 0;
    if (!pair.phi_is_diagonal()) {
        // short random combinations around interior indices carrying filter weight
        RVec eta(data.size());
        for (Index i = 0; i < data.size(); ++i) eta(i) = filter.eta(data.table(i, h_index));
        RVec w = data.basis.cwiseAbs2() * eta;
        std::vector<Index> good;
        double wmax = 0.0;
        for (Index g = 0; g < pair.dim(); ++g)
            if (pair.interior_mask[g]) wmax = std::max(wmax, w(g));
        Index last = 0;
        for (Index g = 0; g < pair.dim(); ++g)
            if (pair.interior_mask[g]) last = g;
        // lower half of the interior, away from the truncation edge
        for (Index g = 0; g <= last / 2; ++g)
            if (pair.interior_mask[g] && w(g) >= 0.1 * wmax && wmax > 0.0) good.push_back(g);
        if (good.empty()) throw Error("FilteredToZero", "no interior basis vector overlaps the filter range");
        std::uniform_int_distribution<size_t> pick(0, good.size() - 1);
        std::normal_distribution<double> z;
        while (static_cast<int>(out.size()) < count) {
            if (++attempts > 50 * count) throw Error("FilteredToZero", "could not build filtered test states");
            Index c = good[pick(rng)];
            CVec s = CVec::Zero(pair.dim());
            for (Index g = std::max<Index>(0, c - 4); g <= std::min<Index>(pair.dim() - 1, c + 4); ++g)
                if (pair.interior_mask[g])
                    s(g) = cplx(z(rng), z(rng)) * std::exp(-0.125 * static_cast<double>((g - c) * (g - c)));
            DtState st;
            try {
                st = make_Dt_state(pair, data, h_index, kappa, filter, s);
            } catch (const Error& e) {
                if (e.code() != "FilteredToZero") throw;
                continue;
            }
            if (st.retained < 1e-3) continue;
            out.push_back(st.phi);
        }
        return out;
    }
    while (static_cast<int>(out.size()) < count) {
        if (++attempts > 50 * count) throw Error("FilteredToZero", "could not build filtered test states");
        RVec c(d), p(d);
        for (int j = 0; j < d; ++j) c(j) = mid(j) + half(j) * u(rng);
        int block = 0;
        if (!plateau.empty()) {
            std::uniform_int_distribution<size_t> pick(0, plateau.size() - 1);
            Index col = plateau[pick(rng)];
            p = pair.exact->modes.row(col).transpose();
            block = static_cast<int>(col / (pair.dim() / std::max(pair.blocks, 1)));
        } else {
            for (int j = 0; j < d; ++j) p(j) = 0.5 * std::numbers::pi / sp * u(rng);
        }
        CVec s = gaussian_packet(pair, c, p, width, block);
        DtState st;
        try {
            st = make_Dt_state(pair, data, h_index, kappa, filter, s);
        } catch (const Error& e) {
            if (e.code() != "FilteredToZero") throw;
            continue;
        }
        if (st.retained < 1e-3) continue;
        out.push_back(st.phi);
    }
    return out;
}

}  // namespace tempo
