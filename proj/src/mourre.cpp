#include "mourre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tempo {

namespace {

double inf_weight(double lambda, double delta) {
    double m = std::max(std::abs(lambda - delta), std::abs(lambda + delta));
    return 1.0 / ((1.0 + m * m) * (1.0 + m * m));
}

CMat apply_phi(const OperatorPair& pair, int j, const CMat& x, bool left) {
    if (pair.phi_is_diagonal()) {
        const RVec& p = pair.phi_diag[j];
        return left ? CMat(p.cast<cplx>().asDiagonal() * x) : CMat(x * p.cast<cplx>().asDiagonal());
    }
    return left ? CMat(pair.Phi[j].m * x) : CMat(x * pair.Phi[j].m);
}

}  // namespace

ConjugateOperatorData build_conjugate(const OperatorPair& pair, const DerivedOperators& derived) {
    Eigensystem es = eigh(pair.H);
    RVec w = (1.0 + es.values.array().square()).inverse().matrix();
    CMat G = from_diag(es.vectors, w);
    ConjugateOperatorData out;
    const Index n = pair.dim();
    CMat a = CMat::Zero(n, n);
    CMat sq = CMat::Zero(n, n);
    for (int j = 0; j < pair.d(); ++j) {
        CMat pi = G * derived.Hp[j].m * G;
        pi = 0.5 * (pi + pi.adjoint()).eval();
        a += 0.5 * (apply_phi(pair, j, pi, false) + apply_phi(pair, j, pi, true));
        sq += derived.Hp[j].m * derived.Hp[j].m;
        out.Pi.push_back({pi, "Pi_" + std::to_string(j + 1)});
    }
    out.A_asymmetry = asymmetry(a);
    out.A = {0.5 * (a + a.adjoint()), "A"};
    CMat c = I1 * (pair.H.m * out.A.m - out.A.m * pair.H.m);
    out.commutator_iHA = {0.5 * (c + c.adjoint()), "i[H,A]"};
    CMat rhs = G * sq * G;
    out.identity_rhs = {0.5 * (rhs + rhs.adjoint()), "<H>^-2 (H')^2 <H>^-2"};
    CMat s = interior_states(pair);
    CMat comp = s.adjoint() * out.commutator_iHA.m * s;
    RVec ev = eigvalsh(0.5 * (comp + comp.adjoint()));
    out.iHA_min_eigenvalue = ev.size() ? ev.minCoeff() : 0.0;
    return out;
}

IdentityReport check_commutator_identity(const OperatorPair& pair, const ConjugateOperatorData& data) {
    IdentityReport rep;
    CMat s = interior_states(pair);
    CMat ds = (data.commutator_iHA.m - data.identity_rhs.m) * s;
    rep.scale = norm2(data.identity_rhs.m);
    double denom = rep.scale > 0.0 ? rep.scale : 1.0;
    rep.residual = norm2(s.adjoint() * ds) / denom;
    rep.vector_residual = norm2(ds) / denom;
    return rep;
}

MourreWindows::MourreWindows(const ConjugateOperatorData& data, const JointSpectralData& spectral,
                             const TupleLayout& layout)
    : spectral_(spectral), layout_(layout), BU_(data.identity_rhs.m * spectral.basis) {}

WindowResult MourreWindows::window(double lambda, double delta) const {
    RVec lam = spectral_.table.col(layout_.h);
    RVec s = hprime_sq(spectral_, layout_);
    std::vector<Index> cols;
    for (Index i = 0; i < lam.size(); ++i)
        if (std::abs(lam(i) - lambda) < delta) cols.push_back(i);
    if (cols.empty()) {
        std::ostringstream os;
        os << "no spectrum in (" << lambda - delta << ", " << lambda + delta << ")";
        throw Error("EmptyWindow", os.str());
    }
    const Index k = static_cast<Index>(cols.size());
    CMat q(spectral_.basis.rows(), k), bq(spectral_.basis.rows(), k);
    double smin = s(cols[0]);
    for (Index c = 0; c < k; ++c) {
        q.col(c) = spectral_.basis.col(cols[c]);
        bq.col(c) = BU_.col(cols[c]);
        smin = std::min(smin, s(cols[c]));
    }
    CMat comp = q.adjoint() * bq;
    WindowResult out;
    out.lambda = lambda;
    out.delta = delta;
    out.columns = k;
    out.a_measured = eigvalsh(0.5 * (comp + comp.adjoint())).minCoeff();
    out.inf_weight = inf_weight(lambda, delta);
    out.a_predicted = smin * out.inf_weight;
    out.pass = out.a_measured >= out.a_predicted - 1e-8;
    return out;
}

WindowResult mourre_window(const ConjugateOperatorData& data, const JointSpectralData& spectral,
                           const TupleLayout& layout, double lambda, double delta) {
    return MourreWindows(data, spectral, layout).window(lambda, delta);
}

KappaAScan kappa_A_scan(const ConjugateOperatorData& data, const JointSpectralData& spectral,
                        const TupleLayout& layout, double delta, double threshold) {
    KappaAScan out;
    RVec lam = spectral.table.col(layout.h);
    RVec s = hprime_sq(spectral, layout);
    std::vector<double> ev(lam.data(), lam.data() + lam.size());
    std::sort(ev.begin(), ev.end());
    double diam = ev.empty() ? 0.0 : ev.back() - ev.front();
    out.delta = delta > 0.0 ? delta : std::max(diam, 1e-12) / 100.0;
    out.threshold = threshold > 0.0 ? threshold : 1e-6 * (s.size() ? s.maxCoeff() : 0.0);
    std::vector<double> uniq;
    for (double v : ev)
        if (uniq.empty() || v - uniq.back() > 1e-10 * std::max(diam, 1e-300)) uniq.push_back(v);
    MourreWindows mw(data, spectral, layout);
    std::vector<std::pair<double, double>> flagged;
    for (size_t i = 0; i < uniq.size(); ++i) {
        // the window holds exactly the eigenspace at uniq[i]
        double g = std::numeric_limits<double>::infinity();
        if (i > 0) g = std::min(g, uniq[i] - uniq[i - 1]);
        if (i + 1 < uniq.size()) g = std::min(g, uniq[i + 1] - uniq[i]);
        double w = std::isfinite(g) ? 0.5 * g : std::max(diam, 1.0);
        WindowResult r = mw.window(uniq[i], w);
        out.windows.push_back(r);
        if (r.a_measured <= out.threshold * r.inf_weight) flagged.emplace_back(uniq[i], r.a_measured / r.inf_weight);
    }
    out.points = group_critical(flagged, out.delta);
    return out;
}

}  // namespace tempo
