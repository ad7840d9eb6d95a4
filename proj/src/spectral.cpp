#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tempo {

namespace {

std::string idx(int j) { return std::to_string(j + 1); }

int find_label(const JointSpectralData& data, const std::string& label) {
    for (size_t i = 0; i < data.labels.size(); ++i)
        if (data.labels[i] == label) return static_cast<int>(i);
    return -1;
}

}  // namespace

TupleLayout layout_of(const JointSpectralData& data, int d) {
    TupleLayout l;
    l.d = d;
    l.h = data.index_of("H");
    for (int j = 0; j < d; ++j) l.hp.push_back(data.index_of("H'_" + idx(j)));
    std::vector<int> hpp;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) hpp.push_back(find_label(data, "H''_" + idx(j) + idx(k)));
    if (std::all_of(hpp.begin(), hpp.end(), [](int i) { return i >= 0; })) l.hpp = hpp;
    return l;
}

JointSpectralData joint_spectral(const OperatorPair& pair, const DerivedOperators* derived, bool with_hpp,
                                 std::uint64_t seed) {
    const int d = pair.d();
    if (pair.exact) {
        const SymbolData& s = *pair.exact;
        JointSpectralData out;
        out.basis = s.basis;
        const Index n = s.m.size();
        out.table.resize(n, 1 + d + (with_hpp ? d * d : 0));
        out.table.col(0) = s.m;
        out.labels.push_back("H");
        for (int j = 0; j < d; ++j) {
            out.table.col(1 + j) = s.dm.col(j);
            out.labels.push_back("H'_" + idx(j));
        }
        if (with_hpp)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    out.table.col(1 + d + j * d + k) = s.ddm.col(j * d + k);
                    out.labels.push_back("H''_" + idx(j) + idx(k));
                }
        if (n <= 2048) check_joint(out, {&pair.H});
        return out;
    }
    if (!derived) throw Error("NotJointlyDiagonalized", "derived operators required for " + pair.model_id);
    std::vector<const HermitianOperator*> fam{&pair.H};
    for (const auto& o : derived->Hp) fam.push_back(&o);
    if (with_hpp)
        for (const auto& o : derived->Hpp) fam.push_back(&o);
    JointSpectralData out = joint_diagonalize(fam, 1e-8, seed);
    out.labels[0] = "H";
    return out;
}

RVec hprime_sq(const JointSpectralData& data, const TupleLayout& layout) {
    RVec s = RVec::Zero(data.size());
    for (int c : layout.hp) s += data.table.col(c).array().square().matrix();
    return s;
}

std::vector<CriticalPoint> group_critical(std::vector<std::pair<double, double>> flagged, double delta) {
    std::sort(flagged.begin(), flagged.end());
    std::vector<CriticalPoint> out;
    size_t i = 0;
    while (i < flagged.size()) {
        size_t j = i;
        CriticalPoint best{flagged[i].first, flagged[i].second};
        while (j + 1 < flagged.size() && flagged[j + 1].first - flagged[j].first <= delta) {
            ++j;
            if (flagged[j].second < best.hprime_sq_min) best = {flagged[j].first, flagged[j].second};
        }
        out.push_back(best);
        i = j + 1;
    }
    return out;
}

CriticalSetEstimate kappa_estimate(const JointSpectralData& data, const TupleLayout& layout, double delta,
                                   double threshold) {
    const Index n = data.size();
    RVec lam = data.table.col(layout.h);
    RVec s = hprime_sq(data, layout);
    CriticalSetEstimate out;
    out.method = "joint_spectral";
    if (n == 0) return out;
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return lam(a) < lam(b); });
    double diam = lam(order.back()) - lam(order.front());
    out.delta = delta > 0.0 ? delta : std::max(diam, 1e-12) / 100.0;
    out.threshold = threshold > 0.0 ? threshold : 1e-6 * s.maxCoeff();
    std::vector<std::pair<double, double>> flagged;
    Index lo = 0;
    for (Index i = 0; i < n; ++i) {
        double l = lam(order[i]);
        while (lam(order[lo]) <= l - out.delta) ++lo;
        double best = s(order[i]);
        Index arg = order[i];
        for (Index k = lo; k < n && lam(order[k]) < l + out.delta; ++k)
            if (s(order[k]) < best) {
                best = s(order[k]);
                arg = order[k];
            }
        if (best <= out.threshold) flagged.emplace_back(lam(arg), best);
    }
    out.points = group_critical(flagged, out.delta);
    return out;
}

CriticalSetEstimate kappa_symbolic(const SymbolData& symbol, int resolution) {
    const int d = symbol.d;
    if (!symbol.grad_fn || !symbol.hess_fn || !symbol.m_fn) throw Error("DomainError", "symbol functions missing");
    if (resolution < 4) throw Error("DomainError", "resolution must be >= 4");
    Index total = 1;
    for (int j = 0; j < d; ++j) total *= resolution;
    if (total > 16'000'000) throw Error("DomainError", "symbolic grid too large");
    RVec lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
        if (symbol.torus) {
            lo(j) = -std::numbers::pi;
            hi(j) = std::numbers::pi;
        } else {
            lo(j) = symbol.modes.col(j).minCoeff();
            hi(j) = symbol.modes.col(j).maxCoeff();
        }
    }
    auto point = [&](const std::vector<int>& c) {
        RVec xi(d);
        for (int j = 0; j < d; ++j) {
            double step = symbol.torus ? (hi(j) - lo(j)) / resolution : (hi(j) - lo(j)) / (resolution - 1);
            xi(j) = lo(j) + c[j] * step;
        }
        return xi;
    };
    auto unflat = [&](Index f) {
        std::vector<int> c(d);
        for (int j = d - 1; j >= 0; --j) {
            c[j] = static_cast<int>(f % resolution);
            f /= resolution;
        }
        return c;
    };
    auto flat = [&](const std::vector<int>& c) {
        Index f = 0;
        for (int j = 0; j < d; ++j) f = f * resolution + c[j];
        return f;
    };
    std::vector<double> g2(total);
    for (Index f = 0; f < total; ++f) g2[f] = symbol.grad_fn(point(unflat(f))).squaredNorm();

    CriticalSetEstimate out;
    out.method = "symbolic";
    std::vector<double> values;
    std::vector<double> residuals;
    Index neigh = 1;
    for (int j = 0; j < d; ++j) neigh *= 3;
    for (Index f = 0; f < total; ++f) {
        std::vector<int> c = unflat(f);
        bool is_min = true;
        for (Index o = 0; o < neigh && is_min; ++o) {
            Index t = o;
            std::vector<int> nb = c;
            bool valid = true, self = true;
            for (int j = 0; j < d; ++j) {
                int s = static_cast<int>(t % 3) - 1;
                t /= 3;
                if (s) self = false;
                nb[j] += s;
                if (symbol.torus) {
                    nb[j] = (nb[j] + resolution) % resolution;
                } else if (nb[j] < 0 || nb[j] >= resolution) {
                    valid = false;
                }
            }
            if (self || !valid) continue;
            if (g2[flat(nb)] < g2[f]) is_min = false;
        }
        if (!is_min) continue;
        RVec xi = point(c);
        RVec g = symbol.grad_fn(xi);
        for (int it = 0; it < 60 && g.norm() > 1e-13; ++it) {
            RMat hs = symbol.hess_fn(xi);
            RVec step = hs.completeOrthogonalDecomposition().solve(g);
            if (!step.allFinite() || step.norm() == 0.0) break;
            xi -= step;
            g = symbol.grad_fn(xi);
        }
        if (g.norm() > 1e-12) continue;
        double m = symbol.m_fn(xi);
        bool dup = false;
        for (double v : values)
            if (std::abs(v - m) <= 1e-9 * std::max(1.0, std::abs(m))) dup = true;
        if (!dup) {
            values.push_back(m);
            residuals.push_back(g.squaredNorm());
        }
    }
    std::vector<double> offsets{0.0};
    if (symbol.fiber_offset.size()) {
        offsets.assign(symbol.fiber_offset.data(), symbol.fiber_offset.data() + symbol.fiber_offset.size());
        std::sort(offsets.begin(), offsets.end());
        offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    }
    for (double o : offsets)
        for (size_t i = 0; i < values.size(); ++i) out.points.push_back({values[i] + o, residuals[i]});
    std::sort(out.points.begin(), out.points.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.lambda < b.lambda; });
    return out;
}

double interior_mass(const OperatorPair& pair, const CVec& phi) {
    double in = 0.0;
    for (Index g = 0; g < phi.size(); ++g)
        if (pair.interior_mask[g]) in += std::norm(phi(g));
    return in / std::max(phi.squaredNorm(), 1e-300);
}

double phi_weight(const OperatorPair& pair, const CVec& phi, int t) {
    if (pair.phi_is_diagonal()) {
        double s = 0.0;
        for (Index g = 0; g < phi.size(); ++g) {
            double w = 1.0;
            for (int j = 0; j < pair.d(); ++j) w += pair.phi_diag[j](g) * pair.phi_diag[j](g);
            s += std::pow(w, t) * std::norm(phi(g));
        }
        return std::sqrt(s);
    }
    CMat w = CMat::Identity(phi.size(), phi.size());
    for (const auto& p : pair.Phi) w += p.m * p.m;
    Eigensystem es = eigh({0.5 * (w + w.adjoint()), "<Phi>^2"});
    CVec c = es.vectors.adjoint() * phi;
    double s = 0.0;
    for (Index i = 0; i < c.size(); ++i) s += std::pow(es.values(i), t) * std::norm(c(i));
    return std::sqrt(s);
}

DtState make_Dt_state(const OperatorPair& pair, const JointSpectralData& data, int h_index,
                      const CriticalSetEstimate& kappa, const SpectralFilter& filter, const CVec& seed) {
    filter.validate();
    for (const auto& p : kappa.points)
        if (std::abs(p.lambda - filter.center) <= filter.half_width + filter.margin) {
            std::ostringstream os;
            os << "critical value " << p.lambda << " inside filter support";
            throw Error("FilterHitsKappa", os.str());
        }
    double sn = seed.norm();
    if (!(sn > 0.0)) throw Error("FilteredToZero", "seed state is zero");
    CVec c = data.basis.adjoint() * seed;
    for (Index i = 0; i < c.size(); ++i) c(i) *= filter.eta(data.table(i, h_index));
    CVec phi = data.basis * c;
    double pn = phi.norm();
    if (pn <= 1e-12 * sn) throw Error("FilteredToZero", "filter annihilates the seed state");
    DtState out;
    out.phi = phi / pn;
    out.retained = pn / sn;
    out.interior_mass = interior_mass(pair, out.phi);
    for (int t = 0; t < 3; ++t) out.phi_weight[t] = phi_weight(pair, out.phi, t);
    return out;
}

KernelSplit kernel_split(const JointSpectralData& data, const TupleLayout& layout, double tolerance) {
    RVec s = hprime_sq(data, layout);
    double mx = s.size() ? s.maxCoeff() : 0.0;
    KernelSplit out;
    out.tolerance = tolerance;
    for (Index i = 0; i < s.size(); ++i) (s(i) <= tolerance * mx ? out.k_columns : out.g_columns).push_back(i);
    const Index n = data.basis.rows();
    out.K_basis.resize(n, static_cast<Index>(out.k_columns.size()));
    out.G_basis.resize(n, static_cast<Index>(out.g_columns.size()));
    for (size_t i = 0; i < out.k_columns.size(); ++i) out.K_basis.col(static_cast<Index>(i)) = data.basis.col(out.k_columns[i]);
    for (size_t i = 0; i < out.g_columns.size(); ++i) out.G_basis.col(static_cast<Index>(i)) = data.basis.col(out.g_columns[i]);
    return out;
}

KernelSplit kernel_split(const DerivedOperators& derived, double tolerance) {
    CMat sq = CMat::Zero(derived.Hp[0].dim(), derived.Hp[0].dim());
    for (const auto& hp : derived.Hp) sq += hp.m * hp.m;
    auto es = eigh(make_hermitian(sq, "(H')^2", 1e-10));
    const double mx = std::max(es.values.cwiseAbs().maxCoeff(), 1e-300);
    KernelSplit out;
    out.tolerance = tolerance;
    for (Index i = 0; i < es.values.size(); ++i) (es.values(i) <= tolerance * mx ? out.k_columns : out.g_columns).push_back(i);
    out.K_basis.resize(sq.rows(), static_cast<Index>(out.k_columns.size()));
    out.G_basis.resize(sq.rows(), static_cast<Index>(out.g_columns.size()));
    for (size_t i = 0; i < out.k_columns.size(); ++i) out.K_basis.col(static_cast<Index>(i)) = es.vectors.col(out.k_columns[i]);
    for (size_t i = 0; i < out.g_columns.size(); ++i) out.G_basis.col(static_cast<Index>(i)) = es.vectors.col(out.g_columns[i]);
    return out;
}

ReducedPair reduced_pair(const OperatorPair& pair, const KernelSplit& split) {
    ReducedPair out;
    if (split.K_basis.cols() == 0) {
        out.pair = pair;
        return out;
    }
    const CMat& K = split.K_basis;
    const CMat& G = split.G_basis;
    double hn = norm2(pair.H.m);
    out.h_offblock = norm2(K.adjoint() * pair.H.m * G);
    if (out.h_offblock > 1e-8 * hn) {
        std::ostringstream os;
        os << "H off-block norm " << out.h_offblock;
        throw Error("NotReduced", os.str());
    }
    std::vector<HermitianOperator> phis;
    for (const auto& p : pair.Phi) {
        double pn = std::max(norm2(p.m), 1e-300);
        double off = norm2(K.adjoint() * p.m * G);
        out.phi_offblock = std::max(out.phi_offblock, off / pn);
        CMat c = G.adjoint() * p.m * G;
        phis.push_back({0.5 * (c + c.adjoint()), p.label});
    }
    out.phi_reduced = out.phi_offblock <= 1e-8;
    std::vector<const HermitianOperator*> fam;
    for (const auto& p : phis) fam.push_back(&p);
    JointSpectralData levels = joint_diagonalize(fam, 1e-8, 0);
    CMat B = G * levels.basis;
    CMat h = B.adjoint() * pair.H.m * B;

    OperatorPair& r = out.pair;
    r.model_id = pair.model_id + "_reduced";
    r.H = {0.5 * (h + h.adjoint()), "H"};
    const Index g = B.cols();
    for (int j = 0; j < pair.d(); ++j) {
        RVec lv = levels.table.col(j);
        r.phi_diag.push_back(lv);
        r.Phi.push_back({CMat(lv.cast<cplx>().asDiagonal()), "Phi_" + idx(j)});
    }
    r.period = pair.period;
    r.interior_mask.assign(static_cast<size_t>(g), 1);
    for (Index c = 0; c < g; ++c) {
        double outside = 0.0;
        for (Index s = 0; s < B.rows(); ++s)
            if (!pair.interior_mask[s]) outside += std::norm(B(s, c));
        if (outside > 1e-12) r.interior_mask[c] = 0;
    }
    r.interior_kind = InteriorKind::BasisVectors;
    r.shape = {static_cast<int>(g)};
    r.spacing = RVec::Ones(pair.d());
    r.params = pair.params;
    r.params["reduced_from"] = pair.model_id;
    return out;
}

}  // namespace tempo
