#include "commutators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace tempo {

namespace {

HermitianOperator symmetrized(CMat m, std::string label, double& defect) {
    defect = std::max(defect, asymmetry(m));
    CMat s = 0.5 * (m + m.adjoint());
    return {std::move(s), std::move(label)};
}

CMat icomm_phi(const OperatorPair& pair, const CMat& x, int k) {
    if (pair.phi_is_diagonal()) {
        const RVec& p = pair.phi_diag[k];
        CMat out(x.rows(), x.cols());
        for (Index h = 0; h < x.cols(); ++h)
            for (Index g = 0; g < x.rows(); ++g) out(g, h) = I1 * x(g, h) * (p(h) - p(g));
        return out;
    }
    const CMat& phi = pair.Phi[k].m;
    return I1 * (x * phi - phi * x);
}

double wrap(double dz, double period) {
    if (period <= 0.0) return dz;
    double w = std::fmod(dz, period);
    if (w > 0.5 * period) w -= period;
    if (w <= -0.5 * period) w += period;
    return w;
}

std::string idx(int j) { return std::to_string(j + 1); }

}  // namespace

double interior_norm(const CMat& a, const CMat& states) {
    return norm2(a * states);
}

DerivedOperators matrix_chain(const OperatorPair& pair, int depth) {
    DerivedOperators out;
    const int d = pair.d();
    out.d = d;
    out.provenance = "matrix_commutator";
    for (int j = 0; j < d; ++j)
        out.Hp.push_back(symmetrized(icomm_phi(pair, pair.H.m, j), "H'_" + idx(j), out.asymmetry_defect));
    if (depth >= 2)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                out.Hpp.push_back(symmetrized(icomm_phi(pair, out.Hp[j].m, k), "H''_" + idx(j) + idx(k),
                                              out.asymmetry_defect));
    if (depth >= 3)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    out.Hppp.push_back(symmetrized(icomm_phi(pair, out.hpp(j, k).m, l),
                                                   "H'''_" + idx(j) + idx(k) + idx(l), out.asymmetry_defect));
    return out;
}

DerivedOperators exact_chain(const OperatorPair& pair, int depth) {
    const int d = pair.d();
    DerivedOperators out;
    out.d = d;
    if (pair.exact) {
        const SymbolData& s = *pair.exact;
        out.provenance = "symbol_derivative";
        for (int j = 0; j < d; ++j) out.Hp.push_back({from_diag(s.basis, RVec(s.dm.col(j))), "H'_" + idx(j)});
        if (depth >= 2)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    out.Hpp.push_back({from_diag(s.basis, RVec(s.ddm.col(j * d + k))), "H''_" + idx(j) + idx(k)});
    } else if (!pair.hp_exact.empty()) {
        out.provenance = "closed_form";
        for (int j = 0; j < d; ++j) out.Hp.push_back({pair.hp_exact[j], "H'_" + idx(j)});
        if (depth >= 2)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    out.Hpp.push_back({pair.hpp_exact[static_cast<size_t>(j * d + k)], "H''_" + idx(j) + idx(k)});
    } else if (pair.phi_is_diagonal()) {
        out.provenance = "minimal_image";
        const Index n = pair.dim();
        auto disp = [&](int j, Index g, Index h) {
            return wrap(pair.phi_diag[j](h) - pair.phi_diag[j](g), pair.period.size() ? pair.period(j) : 0.0);
        };
        for (int j = 0; j < d; ++j) {
            CMat m(n, n);
            for (Index h = 0; h < n; ++h)
                for (Index g = 0; g < n; ++g) m(g, h) = I1 * disp(j, g, h) * pair.H.m(g, h);
            out.Hp.push_back(symmetrized(m, "H'_" + idx(j), out.asymmetry_defect));
        }
        if (depth >= 2)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    CMat m(n, n);
                    for (Index h = 0; h < n; ++h)
                        for (Index g = 0; g < n; ++g) m(g, h) = -disp(j, g, h) * disp(k, g, h) * pair.H.m(g, h);
                    out.Hpp.push_back(symmetrized(m, "H''_" + idx(j) + idx(k), out.asymmetry_defect));
                }
    } else {
        return matrix_chain(pair, depth);
    }
    if (depth >= 3)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    out.Hppp.push_back(symmetrized(icomm_phi(pair, out.hpp(j, k).m, l),
                                                   "H'''_" + idx(j) + idx(k) + idx(l), out.asymmetry_defect));
    return out;
}

DerivedOperators commutator_chain(const OperatorPair& pair, int depth, bool cross_check) {
    DerivedOperators ex = exact_chain(pair, depth);
    if (!cross_check || ex.provenance == "matrix_commutator") return ex;
    DerivedOperators mat = matrix_chain(pair, 1);
    CMat s = interior_states(pair);
    double hn = std::max(norm2(pair.H.m), 1e-300);
    double gap = 0.0;
    for (int j = 0; j < pair.d(); ++j) gap = std::max(gap, interior_norm(mat.Hp[j].m - ex.Hp[j].m, s) / hn);
    ex.route_gap = gap;
    ex.asymmetry_defect = std::max(ex.asymmetry_defect, mat.asymmetry_defect);
    return ex;
}

HermitianOperator conjugate(const OperatorPair& pair, const HermitianOperator& op, const RVec& x) {
    if (pair.phi_is_diagonal()) {
        const Index n = op.dim();
        RVec ph = RVec::Zero(n);
        for (int j = 0; j < pair.d(); ++j) ph += x(j) * pair.phi_diag[j];
        CMat out(n, n);
        for (Index h = 0; h < n; ++h)
            for (Index g = 0; g < n; ++g) out(g, h) = std::polar(1.0, -(ph(g) - ph(h))) * op.m(g, h);
        return {out, op.label + "(x)"};
    }
    CMat xp = CMat::Zero(op.dim(), op.dim());
    for (int j = 0; j < pair.d(); ++j) xp += x(j) * pair.Phi[j].m;
    Eigensystem es = eigh({xp, "x.Phi"});
    CVec ph(es.values.size());
    for (Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, es.values(i));
    CMat e = es.vectors * ph.asDiagonal() * es.vectors.adjoint();
    CMat out = e.adjoint() * op.m * e;
    return {0.5 * (out + out.adjoint()), op.label + "(x)"};
}

HermitianOperator conjugate_H(const OperatorPair& pair, const RVec& x) {
    return Conjugator(pair, x.size() ? x.cwiseAbs().maxCoeff() : 0.0).H(x);
}

double max_radius(const std::vector<RVec>& xs) {
    double r = 0.0;
    for (const RVec& x : xs)
        if (x.size()) r = std::max(r, x.cwiseAbs().maxCoeff());
    return r;
}

Conjugator::Conjugator(const OperatorPair& pair, double radius, bool literal) : pair_(pair) {
    if (literal) return;
    if (pair.exact && pair.exact->m_fn && pair.exact->grad_fn && pair.exact->modes.rows() == pair.dim()) {
        route_ = "shifted_symbol";
        return;
    }
    if (!pair.hp_exact.empty() && !pair.rebuild) {
        bool linear = true;
        for (const CMat& m : pair.hpp_exact) linear = linear && m.cwiseAbs().maxCoeff() == 0.0;
        if (linear) {
            route_ = "linear_closed_form";
            return;
        }
    }
    if (pair.phi_is_diagonal()) {
        route_ = pair.hp_exact.empty() ? "minimal_image" : "literal";
        return;
    }
    if (!pair.rebuild || pair.d() != 1) return;
    const Index n = pair.dim();
    int size = static_cast<int>(std::ceil(1.25 * static_cast<double>(n) * std::exp(radius))) + 64;
    // grow the section until the retained columns of e^{ix Phi} stay clear of its edge
    for (int attempt = 0; attempt < 3; ++attempt, size *= 2) {
        big_ = pair.rebuild(size);
        phi_eig_ = eigh(big_.Phi[0]);
        const Index m = big_.dim();
        const Index edge = m - m / 8;
        double worst = 0.0;
        for (double x : {-radius, radius}) {
            CVec ph(m);
            for (Index i = 0; i < m; ++i) ph(i) = std::polar(1.0, x * phi_eig_.values(i));
            CMat e = phi_eig_.vectors * ph.asDiagonal() * phi_eig_.vectors.topRows(n).adjoint();
            worst = std::max(worst, e.bottomRows(m - edge).norm());
        }
        if (worst < 1e-10 * std::sqrt(static_cast<double>(n))) break;
    }
    route_ = "padded_section";
    DerivedOperators d = exact_chain(big_, 1);
    for (const auto& hp : d.Hp) big_hp_.push_back(hp.m);
}

HermitianOperator Conjugator::compress(const CMat& big_op, const std::string& label, const RVec& x) const {
    const Index n = pair_.dim();
    const Index m = big_.dim();
    CVec ph(m);
    for (Index i = 0; i < m; ++i) ph(i) = std::polar(1.0, x(0) * phi_eig_.values(i));
    CMat e = phi_eig_.vectors * ph.asDiagonal() * phi_eig_.vectors.topRows(n).adjoint();
    CMat out = e.adjoint() * big_op * e;
    return {0.5 * (out + out.adjoint()), label + "(x)"};
}

HermitianOperator Conjugator::phased(const CMat& op, const std::string& label, const RVec& x) const {
    const Index n = op.rows();
    CMat out(n, n);
    for (Index h = 0; h < n; ++h)
        for (Index g = 0; g < n; ++g) {
            double ph = 0.0;
            for (int j = 0; j < pair_.d(); ++j)
                ph += x(j) * wrap(pair_.phi_diag[j](h) - pair_.phi_diag[j](g),
                                  pair_.period.size() ? pair_.period(j) : 0.0);
            out(g, h) = std::polar(1.0, ph) * op(g, h);
        }
    return {0.5 * (out + out.adjoint()), label + "(x)"};
}

HermitianOperator Conjugator::H(const RVec& x) const {
    if (route_ == "padded_section") return compress(big_.H.m, pair_.H.label, x);
    if (route_ == "shifted_symbol") {
        const SymbolData& s = *pair_.exact;
        RVec m(s.modes.rows());
        for (Index c = 0; c < m.size(); ++c)
            m(c) = s.m_fn(RVec(s.modes.row(c).transpose() + x)) + (s.fiber_offset.size() ? s.fiber_offset(c) : 0.0);
        return {from_diag(s.basis, m), pair_.H.label + "(x)"};
    }
    if (route_ == "linear_closed_form") {
        CMat out = pair_.H.m;
        for (int j = 0; j < pair_.d(); ++j) out += x(j) * pair_.hp_exact[static_cast<size_t>(j)];
        return {out, pair_.H.label + "(x)"};
    }
    if (route_ == "minimal_image") return phased(pair_.H.m, pair_.H.label, x);
    return conjugate(pair_, pair_.H, x);
}

HermitianOperator Conjugator::Hp(int j, const RVec& x, const DerivedOperators& derived) const {
    const HermitianOperator& hp = derived.Hp[static_cast<size_t>(j)];
    if (route_ == "padded_section") return compress(big_hp_[static_cast<size_t>(j)], hp.label, x);
    if (route_ == "shifted_symbol") {
        const SymbolData& s = *pair_.exact;
        RVec m(s.modes.rows());
        for (Index c = 0; c < m.size(); ++c) m(c) = s.grad_fn(RVec(s.modes.row(c).transpose() + x))(j);
        return {from_diag(s.basis, m), hp.label + "(x)"};
    }
    if (route_ == "linear_closed_form") return {hp.m, hp.label + "(x)"};
    if (route_ == "minimal_image") return phased(hp.m, hp.label, x);
    return conjugate(pair_, hp, x);
}

ResidualReport check_commute_family(const OperatorPair& pair, const std::vector<RVec>& xs) {
    ResidualReport rep;
    rep.name = "commute_family";
    CMat s = interior_states(pair);
    CMat hs = pair.H.m * s;
    double hn = norm2(pair.H.m);
    double denom = std::max(hn * hn, 1e-300);
    Conjugator conj(pair, max_radius(xs));
    rep.route = conj.route();
    for (size_t i = 0; i < xs.size(); ++i) {
        HermitianOperator hx = conj.H(xs[i]);
        CMat r = hx.m * hs - pair.H.m * (hx.m * s);
        double res = norm2(r) / denom;
        rep.residuals.push_back(res);
        if (res >= rep.max_residual) {
            rep.max_residual = res;
            rep.argmax = "sample " + std::to_string(i);
        }
        if (rep.route != "literal") {
            HermitianOperator lx = conjugate(pair, pair.H, xs[i]);
            double seam = norm2(lx.m * hs - pair.H.m * (lx.m * s)) / denom;
            rep.seam_residual = std::max(rep.seam_residual, seam);
        }
    }
    return rep;
}

ResidualReport check_undos(const OperatorPair& pair, const DerivedOperators& derived, const std::vector<RVec>& xs) {
    ResidualReport rep;
    rep.name = "undos";
    CMat s = interior_states(pair);
    std::vector<HermitianOperator> fam;
    fam.push_back(pair.H);
    for (const auto& o : derived.Hp) fam.push_back(o);
    for (const auto& o : derived.Hpp) fam.push_back(o);
    Conjugator conj(pair, max_radius(xs));
    rep.route = conj.route();
    for (const RVec& x : xs) {
        fam.push_back(conj.H(x));
        for (int j = 0; j < pair.d(); ++j) fam.push_back(conj.Hp(j, x, derived));
    }
    std::vector<double> norms;
    std::vector<CMat> applied;
    for (const auto& o : fam) {
        norms.push_back(norm2(o.m));
        applied.push_back(o.m * s);
    }
    for (size_t a = 0; a < fam.size(); ++a)
        for (size_t b = a + 1; b < fam.size(); ++b) {
            if (norms[a] == 0.0 || norms[b] == 0.0) continue;
            CMat r = fam[a].m * applied[b] - fam[b].m * applied[a];
            double res = norm2(r) / (norms[a] * norms[b]);
            rep.residuals.push_back(res);
            if (res >= rep.max_residual) {
                rep.max_residual = res;
                rep.argmax = fam[a].label + " vs " + fam[b].label;
            }
        }
    return rep;
}

VirialReport virial_check(const OperatorPair& pair, const DerivedOperators& derived, const JointSpectralData& spectral,
                          int h_index, double tol) {
    VirialReport rep;
    const Index n = spectral.size();
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    RVec lam = spectral.table.col(h_index);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return lam(a) < lam(b); });
    double diam = n ? lam(order.back()) - lam(order.front()) : 0.0;
    double ctol = 1e-8 * std::max(diam, 1e-300);
    RVec outside(pair.dim());
    for (Index g = 0; g < pair.dim(); ++g) outside(g) = pair.interior_mask[g] ? 0.0 : 1.0;
    Index start = 0;
    for (Index i = 1; i <= n; ++i) {
        if (i < n && lam(order[i]) - lam(order[i - 1]) <= ctol) continue;
        Index size = i - start;
        CMat q(pair.dim(), size);
        for (Index c = 0; c < size; ++c) q.col(c) = spectral.basis.col(order[start + c]);
        CMat mass = q.adjoint() * outside.asDiagonal() * q;
        Eigensystem es = eigh({0.5 * (mass + mass.adjoint()), "mass"});
        std::vector<Index> keep;
        for (Index c = 0; c < size; ++c)
            if (es.values(c) <= 1e-12) keep.push_back(c);
        if (!keep.empty()) {
            CMat ql(pair.dim(), static_cast<Index>(keep.size()));
            for (size_t c = 0; c < keep.size(); ++c) ql.col(static_cast<Index>(c)) = q * es.vectors.col(keep[c]);
            VirialCluster vc;
            vc.lambda = lam(order[start]);
            vc.size = size;
            vc.localized = static_cast<Index>(keep.size());
            for (const auto& hp : derived.Hp) vc.compression = std::max(vc.compression, norm2(ql.adjoint() * hp.m * ql));
            rep.max_compression = std::max(rep.max_compression, vc.compression);
            rep.clusters.push_back(vc);
        }
        start = i;
    }
    (void)tol;
    return rep;
}

std::vector<RVec> sample_shifts(int d, int count, double radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-radius, radius);
    std::vector<RVec> out;
    for (int i = 0; i < count; ++i) {
        RVec x(d);
        for (int j = 0; j < d; ++j) x(j) = u(rng);
        out.push_back(x);
    }
    return out;
}

}  // namespace tempo
