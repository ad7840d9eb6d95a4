#include "models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace tempo {

namespace {

constexpr double kPi = std::numbers::pi;

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMat fourier_1d(const RVec& x, const RVec& p) {
    const Index n = x.size();
    CMat f(n, p.size());
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (Index k = 0; k < p.size(); ++k)
        for (Index g = 0; g < n; ++g) f(g, k) = std::polar(s, p(k) * x(g));
    return f;
}

RVec grid_positions(int N, double L) {
    RVec x(N);
    for (int g = 0; g < N; ++g) x(g) = -0.5 * L + g * (L / N);
    return x;
}

RVec grid_momenta(int N, double L) {
    RVec p(N);
    for (int k = 0; k < N; ++k) p(k) = 2.0 * kPi * (k < N / 2 ? k : k - N) / L;
    return p;
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

HermitianOperator diag_op(const RVec& d, const std::string& label) {
    return {CMat(d.cast<cplx>().asDiagonal()), label};
}

void mask_grid_middle(OperatorPair& pair, int N, int blocks) {
    pair.interior_mask.assign(static_cast<size_t>(N) * blocks, 0);
    for (int b = 0; b < blocks; ++b)
        for (int g = N / 4; g < N - N / 4; ++g) pair.interior_mask[static_cast<size_t>(b) * N + g] = 1;
}

}  // namespace

Index OperatorPair::interior_count() const {
    return std::count(interior_mask.begin(), interior_mask.end(), char(1));
}

RVec OperatorPair::position(Index site) const {
    RVec x(d());
    if (phi_is_diagonal()) {
        for (int j = 0; j < d(); ++j) x(j) = phi_diag[j](site);
    } else {
        x.setConstant(static_cast<double>(site + 1));
    }
    return x;
}

void validate_pair(const OperatorPair& pair, double interior_floor) {
    const Index n = pair.dim();
    if (static_cast<Index>(pair.interior_mask.size()) != n) throw Error("BadDimension", "interior mask size mismatch");
    for (const auto& phi : pair.Phi)
        if (phi.dim() != n) throw Error("BadDimension", "Phi dimension mismatch");
    if (asymmetry(pair.H.m) > 1e-12 * std::max(max_abs(pair.H.m), 1e-300))
        throw Error("NonHermitian", pair.model_id + " H");
    for (size_t j = 0; j < pair.Phi.size(); ++j)
        for (size_t k = j + 1; k < pair.Phi.size(); ++k) {
            double a = norm2(pair.Phi[j].m), b = norm2(pair.Phi[k].m);
            double c = pair.phi_is_diagonal() ? 0.0 : norm2(commutator(pair.Phi[j].m, pair.Phi[k].m));
            if (c > 1e-12 * a * b) throw Error("NotCommuting", "Phi components do not commute");
        }
    if (pair.interior_count() < interior_floor * n)
        throw Error("BadDimension", pair.model_id + " interior mask below the configured floor");
}

OperatorPair build_jacobi_hermite(int N) {
    if (N < 8) throw Error("BadDimension", "jacobi_hermite needs N >= 8");
    CMat h = CMat::Zero(N, N), phi = CMat::Zero(N, N);
    // rows are n = 1..N stored at n-1
    for (int n = 1; n <= N; ++n) {
        int r = n - 1;
        if (n > 1) {
            h(r, r - 1) = std::sqrt(n - 1.0) / 2.0;
            phi(r, r - 1) = -I1 * std::sqrt(n - 1.0);
        }
        if (n < N) {
            h(r, r + 1) = std::sqrt(static_cast<double>(n)) / 2.0;
            phi(r, r + 1) = I1 * std::sqrt(static_cast<double>(n));
        }
    }
    OperatorPair pair;
    pair.model_id = "jacobi_hermite";
    pair.H = make_hermitian(h, "H");
    pair.Phi.push_back(make_hermitian(phi, "Phi_1"));
    pair.period = RVec::Zero(1);
    pair.interior_mask.assign(N, 1);
    int cut = (N + 7) / 8;
    for (int i = N - cut; i < N; ++i) pair.interior_mask[i] = 0;
    pair.hp_exact.push_back(CMat::Identity(N, N));
    pair.hpp_exact.push_back(CMat::Zero(N, N));
    pair.shape = {N};
    pair.spacing = RVec::Ones(1);
    pair.params["N"] = std::to_string(N);
    pair.rebuild = build_jacobi_hermite;
    return pair;
}

OperatorPair build_jacobi_laguerre(int N) {
    if (N < 8) throw Error("BadDimension", "jacobi_laguerre needs N >= 8");
    CMat h = CMat::Zero(N, N), phi = CMat::Zero(N, N);
    for (int n = 1; n <= N; ++n) {
        int r = n - 1;
        h(r, r) = 2.0 * n - 1.0;
        if (n > 1) {
            h(r, r - 1) = n - 1.0;
            phi(r, r - 1) = -0.5 * I1 * (n - 1.0);
        }
        if (n < N) {
            h(r, r + 1) = static_cast<double>(n);
            phi(r, r + 1) = 0.5 * I1 * static_cast<double>(n);
        }
    }
    OperatorPair pair;
    pair.model_id = "jacobi_laguerre";
    pair.H = make_hermitian(h, "H");
    pair.Phi.push_back(make_hermitian(phi, "Phi_1"));
    pair.period = RVec::Zero(1);
    pair.interior_mask.assign(N, 1);
    int cut = (N + 7) / 8;
    for (int i = N - cut; i < N; ++i) pair.interior_mask[i] = 0;
    pair.hp_exact.push_back(pair.H.m);
    pair.hpp_exact.push_back(pair.H.m);
    pair.shape = {N};
    pair.spacing = RVec::Ones(1);
    pair.params["N"] = std::to_string(N);
    pair.rebuild = build_jacobi_laguerre;
    return pair;
}

ConvolutionSpec two_cos(int box) {
    ConvolutionSpec s;
    s.d = 1;
    s.box = box;
    s.coeffs = {{{1}, 1.0}, {{-1}, 1.0}};
    return s;
}

ConvolutionSpec square_lattice(int box) {
    ConvolutionSpec s;
    s.d = 2;
    s.box = box;
    s.coeffs = {{{1, 0}, 1.0}, {{-1, 0}, 1.0}, {{0, 1}, 1.0}, {{0, -1}, 1.0}};
    return s;
}

OperatorPair build_convolution_zd(const ConvolutionSpec& spec) {
    const int d = spec.d, L = spec.box;
    if (d < 1 || d > 3) throw Error("BadDimension", "convolution_zd supports d = 1..3");
    if (spec.coeffs.empty()) throw Error("AsymmetricMeasure", "empty measure");
    int support = 0;
    bool trivial = true;
    for (const auto& [g, w] : spec.coeffs) {
        if (static_cast<int>(g.size()) != d) throw Error("BadDimension", "measure offset dimension mismatch");
        bool found = false;
        for (const auto& [h, u] : spec.coeffs) {
            bool neg = true;
            for (int j = 0; j < d; ++j) neg = neg && h[j] == -g[j];
            if (neg && std::abs(u - std::conj(w)) <= 1e-14 * std::max(1.0, std::abs(w))) found = true;
        }
        if (!found) throw Error("AsymmetricMeasure", "mu(g) != conj(mu(-g))");
        for (int j = 0; j < d; ++j) {
            support = std::max(support, std::abs(g[j]));
            if (g[j] != 0) trivial = false;
        }
    }
    if (trivial && !spec.allow_trivial) throw Error("AsymmetricMeasure", "support {0} not allowed by flag");
    if (L < 4 * std::max(support, 1)) throw Error("SupportTooLargeForBox", "box must be >= 4 * support radius");

    Index n = 1;
    for (int j = 0; j < d; ++j) n *= L;
    auto coord = [&](Index site, int j) {
        Index stride = 1;
        for (int k = d - 1; k > j; --k) stride *= L;
        return static_cast<int>((site / stride) % L) - L / 2;
    };
    auto site_of = [&](const std::vector<int>& c) {
        Index s = 0;
        for (int j = 0; j < d; ++j) s = s * L + (((c[j] + L / 2) % L + L) % L);
        return s;
    };

    CMat h = CMat::Zero(n, n);
    std::vector<int> c(d);
    for (Index g = 0; g < n; ++g) {
        for (const auto& [off, w] : spec.coeffs) {
            for (int j = 0; j < d; ++j) c[j] = coord(g, j) - off[j];
            h(g, site_of(c)) += w;
        }
    }
    OperatorPair pair;
    pair.model_id = "convolution_zd";
    pair.H = make_hermitian(h, "H");
    pair.phi_diag.resize(d);
    for (int j = 0; j < d; ++j) {
        RVec pos(n);
        for (Index g = 0; g < n; ++g) pos(g) = coord(g, j);
        pair.phi_diag[j] = pos;
        pair.Phi.push_back(diag_op(pos, "Phi_" + std::to_string(j + 1)));
    }
    pair.period = RVec::Constant(d, static_cast<double>(L));
    pair.interior_mask.assign(n, 1);
    int guard = 2 * std::max(support, 1);
    for (Index g = 0; g < n; ++g)
        for (int j = 0; j < d; ++j) {
            int x = coord(g, j);
            if (x < -L / 2 + guard || x > L / 2 - 1 - guard) pair.interior_mask[g] = 0;
        }
    pair.shape.assign(d, L);
    pair.spacing = RVec::Ones(d);

    SymbolData sym;
    sym.d = d;
    sym.torus = true;
    sym.coeffs = spec.coeffs;
    auto coeffs = spec.coeffs;
    sym.m_fn = [coeffs, d](const RVec& xi) {
        cplx s = 0.0;
        for (const auto& [g, w] : coeffs) {
            double ph = 0.0;
            for (int j = 0; j < d; ++j) ph += g[j] * xi(j);
            s += w * std::polar(1.0, -ph);
        }
        return s.real();
    };
    sym.grad_fn = [coeffs, d](const RVec& xi) {
        RVec out = RVec::Zero(d);
        for (const auto& [g, w] : coeffs) {
            double ph = 0.0;
            for (int j = 0; j < d; ++j) ph += g[j] * xi(j);
            cplx e = w * std::polar(1.0, -ph);
            for (int j = 0; j < d; ++j) out(j) += (-I1 * static_cast<double>(g[j]) * e).real();
        }
        return out;
    };
    sym.hess_fn = [coeffs, d](const RVec& xi) {
        RMat out = RMat::Zero(d, d);
        for (const auto& [g, w] : coeffs) {
            double ph = 0.0;
            for (int j = 0; j < d; ++j) ph += g[j] * xi(j);
            cplx e = w * std::polar(1.0, -ph);
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) out(j, k) += (-static_cast<double>(g[j] * g[k]) * e).real();
        }
        return out;
    };
    RVec x1(L), xi1(L);
    for (int g = 0; g < L; ++g) x1(g) = g - L / 2;
    for (int k = 0; k < L; ++k) xi1(k) = 2.0 * kPi * (k <= L / 2 ? k : k - L) / L;
    CMat f1 = fourier_1d(x1, xi1);
    CMat basis = f1;
    for (int j = 1; j < d; ++j) basis = kron(basis, f1);
    sym.basis = std::move(basis);
    sym.modes.resize(n, d);
    sym.m.resize(n);
    sym.dm.resize(n, d);
    sym.ddm.resize(n, d * d);
    for (Index k = 0; k < n; ++k) {
        RVec xi(d);
        for (int j = 0; j < d; ++j) xi(j) = xi1(coord(k, j) + L / 2);
        sym.modes.row(k) = xi.transpose();
        sym.m(k) = sym.m_fn(xi);
        sym.dm.row(k) = sym.grad_fn(xi).transpose();
        RMat hs = sym.hess_fn(xi);
        for (int j = 0; j < d; ++j)
            for (int l = 0; l < d; ++l) sym.ddm(k, j * d + l) = hs(j, l);
    }
    pair.exact = std::move(sym);
    pair.params["d"] = std::to_string(d);
    pair.params["box"] = std::to_string(L);
    return pair;
}

OperatorPair build_friedrichs(double v, const std::function<double(double)>& V, int N, double L,
                              const std::string& potential_label) {
    if (v == 0.0) throw Error("ZeroVelocity", "friedrichs needs v != 0");
    if (!power_of_two(N)) throw Error("BadDimension", "friedrichs needs N a power of two");
    RVec x = grid_positions(N, L), p = grid_momenta(N, L);
    CMat f = fourier_1d(x, p);
    RVec vx(N);
    bool free = true;
    for (int g = 0; g < N; ++g) {
        vx(g) = V ? V(x(g)) : 0.0;
        if (!std::isfinite(vx(g))) throw Error("NonFiniteSymbol", "potential not finite");
        free = free && vx(g) == 0.0;
    }
    CMat h = from_diag(f, RVec(v * p));
    h.diagonal() += vx.cast<cplx>();
    OperatorPair pair;
    pair.model_id = "friedrichs";
    pair.H = make_hermitian(h, "H");
    pair.phi_diag = {x};
    pair.Phi.push_back(diag_op(x, "Phi_1"));
    pair.period = RVec::Constant(1, L);
    mask_grid_middle(pair, N, 1);
    pair.hp_exact.push_back(v * CMat::Identity(N, N));
    pair.hpp_exact.push_back(CMat::Zero(N, N));
    pair.interior_kind = InteriorKind::Packets;
    pair.shape = {N};
    pair.spacing = RVec::Constant(1, L / N);
    if (free) {
        SymbolData sym;
        sym.basis = f;
        sym.modes = p;
        sym.m = v * p;
        sym.dm = RMat::Constant(N, 1, v);
        sym.ddm = RMat::Zero(N, 1);
        sym.m_fn = [v](const RVec& q) { return v * q(0); };
        sym.grad_fn = [v](const RVec&) { return RVec::Constant(1, v); };
        sym.hess_fn = [](const RVec&) { return RMat::Zero(1, 1); };
        pair.exact = std::move(sym);
    }
    pair.params["v"] = std::to_string(v);
    pair.params["N"] = std::to_string(N);
    pair.params["L"] = std::to_string(L);
    pair.params["potential"] = potential_label;
    return pair;
}

DispersiveSymbol polynomial_symbol(const std::vector<double>& c) {
    DispersiveSymbol s;
    std::ostringstream os;
    for (size_t n = 0; n < c.size(); ++n) os << (n ? "," : "") << c[n];
    s.label = "poly(" + os.str() + ")";
    s.h = [c](double p) {
        double v = 0.0;
        for (size_t n = c.size(); n-- > 0;) v = v * p + c[n];
        return v;
    };
    s.dh = [c](double p) {
        double v = 0.0;
        for (size_t n = c.size(); n-- > 1;) v = v * p + n * c[n];
        return v;
    };
    s.d2h = [c](double p) {
        double v = 0.0;
        for (size_t n = c.size(); n-- > 2;) v = v * p + n * (n - 1.0) * c[n];
        return v;
    };
    return s;
}

OperatorPair build_dispersive(const DispersiveSymbol& sym_in, int N, double L) {
    if (!power_of_two(N)) throw Error("BadDimension", "dispersive needs N a power of two");
    RVec x = grid_positions(N, L), p = grid_momenta(N, L);
    RVec hv(N), dh(N), d2h(N);
    for (int k = 0; k < N; ++k) {
        hv(k) = sym_in.h(p(k));
        dh(k) = sym_in.dh(p(k));
        d2h(k) = sym_in.d2h(p(k));
        if (!std::isfinite(hv(k)) || !std::isfinite(dh(k)) || !std::isfinite(d2h(k)))
            throw Error("NonFiniteSymbol", "symbol not finite on the momentum grid");
    }
    CMat f = fourier_1d(x, p);
    OperatorPair pair;
    pair.model_id = "dispersive";
    pair.H = make_hermitian(from_diag(f, hv), "H");
    pair.phi_diag = {x};
    pair.Phi.push_back(diag_op(x, "Phi_1"));
    pair.period = RVec::Constant(1, L);
    mask_grid_middle(pair, N, 1);
    pair.interior_kind = InteriorKind::Packets;
    pair.shape = {N};
    pair.spacing = RVec::Constant(1, L / N);
    SymbolData sym;
    sym.basis = f;
    sym.modes = p;
    sym.m = hv;
    sym.dm = dh;
    sym.ddm = d2h;
    auto h = sym_in.h, d1 = sym_in.dh, d2 = sym_in.d2h;
    sym.m_fn = [h](const RVec& q) { return h(q(0)); };
    sym.grad_fn = [d1](const RVec& q) { return RVec::Constant(1, d1(q(0))); };
    sym.hess_fn = [d2](const RVec& q) { return RMat::Constant(1, 1, d2(q(0))); };
    pair.exact = std::move(sym);
    pair.params["symbol"] = sym_in.label;
    pair.params["N"] = std::to_string(N);
    pair.params["L"] = std::to_string(L);
    return pair;
}

GraphSpec layered_graph(const std::vector<int>& pattern, int z_min, int z_max, bool periodic, double twist) {
    if (pattern.empty() || z_max < z_min) throw Error("BadDimension", "empty graph window");
    GraphSpec spec;
    spec.z_min = z_min;
    spec.z_max = z_max;
    spec.periodic = periodic;
    std::vector<std::vector<int>> at_level;
    const int P = static_cast<int>(pattern.size());
    for (int z = z_min; z <= z_max; ++z) {
        int m = pattern[((z % P) + P) % P];
        if (m < 1) throw Error("BadDimension", "multiplicity must be >= 1");
        std::vector<int> ids;
        for (int i = 0; i < m; ++i) {
            ids.push_back(static_cast<int>(spec.level.size()));
            spec.level.push_back(z);
        }
        at_level.push_back(ids);
    }
    for (size_t l = 0; l + 1 < at_level.size(); ++l)
        for (int a : at_level[l])
            for (int b : at_level[l + 1]) {
                spec.edges.emplace_back(a, b);
                spec.weight.push_back(1.0);
            }
    // seam edges carry a phase so the ring has no zero-velocity modes
    if (periodic && at_level.size() > 2)
        for (int a : at_level.back())
            for (int b : at_level.front()) {
                spec.edges.emplace_back(a, b);
                spec.weight.push_back(std::polar(1.0, twist));
            }
    return spec;
}

GraphSpec alternating_graph(int z_min, int z_max, bool periodic, double twist) {
    // multiplicity 1 on even levels and 2 on odd levels
    return layered_graph({1, 2}, z_min, z_max, periodic, twist);
}

AdmissibilityReport validate_admissible(const GraphSpec& spec) {
    AdmissibilityReport rep;
    const Index n = spec.vertices();
    const int W = spec.z_max - spec.z_min + 1;
    auto step = [&](int lo, int hi) {
        int dz = spec.level[hi] - spec.level[lo];
        if (spec.periodic) {
            dz = ((dz % W) + W) % W;
            if (dz > W / 2) dz -= W;
        }
        return dz;
    };
    std::vector<std::set<int>> down(n), up(n);
    for (auto [a, b] : spec.edges) {
        if (a == b || a < 0 || b < 0 || a >= n || b >= n) {
            rep.pass = rep.index_zero = false;
            rep.violation = "malformed edge";
            return rep;
        }
        // a potential with Phi(upper) = Phi(lower) + 1 exists iff every closed path has index zero
        if (step(a, b) != 1) {
            rep.pass = rep.index_zero = false;
            std::ostringstream os;
            os << "edge (" << a << "," << b << ") joins levels " << spec.level[a] << " and " << spec.level[b];
            rep.violation = os.str();
            return rep;
        }
        up[a].insert(b);
        down[b].insert(a);
    }
    auto complete = [&](Index g) {
        if (spec.periodic) return true;
        return spec.level[g] > spec.z_min && spec.level[g] < spec.z_max;
    };
    for (Index g = 0; g < n; ++g) {
        if (!complete(g)) continue;
        for (Index h = g; h < n; ++h) {
            if (!complete(h)) continue;
            ++rep.pairs_checked;
            auto count = [](const std::set<int>& a, const std::set<int>& b) {
                int c = 0;
                for (int v : a) c += static_cast<int>(b.count(v));
                return c;
            };
            int nd = count(down[g], down[h]), nu = count(up[g], up[h]);
            if (nd != nu) {
                rep.pass = rep.counts_match = false;
                std::ostringstream os;
                os << "vertices " << g << "," << h << ": " << nd << " common fathers vs " << nu << " common sons";
                rep.violation = os.str();
                return rep;
            }
        }
    }
    return rep;
}

OperatorPair build_adjacency(const GraphSpec& spec) {
    AdmissibilityReport rep = validate_admissible(spec);
    if (!rep.pass) throw Error("NotAdmissible", rep.violation);
    const Index n = spec.vertices();
    CMat h = CMat::Zero(n, n);
    for (size_t e = 0; e < spec.edges.size(); ++e) {
        auto [a, b] = spec.edges[e];
        cplx w = e < spec.weight.size() ? spec.weight[e] : cplx(1.0);
        h(a, b) = w;
        h(b, a) = std::conj(w);
    }
    RVec lv(n);
    for (Index g = 0; g < n; ++g) lv(g) = spec.level[g];
    OperatorPair pair;
    pair.model_id = "adjacency";
    pair.H = make_hermitian(h, "H");
    pair.phi_diag = {lv};
    pair.Phi.push_back(diag_op(lv, "Phi_1"));
    const int W = spec.z_max - spec.z_min + 1;
    pair.period = RVec::Constant(1, spec.periodic ? static_cast<double>(W) : 0.0);
    pair.interior_mask.assign(n, 1);
    for (Index g = 0; g < n; ++g)
        if (spec.level[g] == spec.z_min || spec.level[g] == spec.z_max) pair.interior_mask[g] = 0;
    pair.shape = {static_cast<int>(n)};
    pair.spacing = RVec::Ones(1);
    pair.params["z_min"] = std::to_string(spec.z_min);
    pair.params["z_max"] = std::to_string(spec.z_max);
    pair.params["periodic"] = spec.periodic ? "true" : "false";
    return pair;
}

OperatorPair build_waveguide(double Lt, int M, int N, double L) {
    if (M < 1 || !power_of_two(N) || !(Lt > 0.0) || !(L > 0.0))
        throw Error("BadDimension", "waveguide needs M >= 1, N a power of two, positive lengths");
    RVec x = grid_positions(N, L), p = grid_momenta(N, L);
    CMat f = fourier_1d(x, p);
    RVec e(M);
    for (int k = 0; k < M; ++k) e(k) = std::pow((k + 1) * kPi / Lt, 2);
    CMat lap = from_diag(f, RVec(p.array().square()));
    const Index n = static_cast<Index>(M) * N;
    CMat h = CMat::Zero(n, n);
    for (int k = 0; k < M; ++k) {
        h.block(k * N, k * N, N, N) = lap;
        h.block(k * N, k * N, N, N).diagonal().array() += e(k);
    }
    RVec pos(n);
    for (int k = 0; k < M; ++k) pos.segment(k * N, N) = x;
    OperatorPair pair;
    pair.model_id = "waveguide";
    pair.H = make_hermitian(h, "H");
    pair.phi_diag = {pos};
    pair.Phi.push_back(diag_op(pos, "Phi_1"));
    pair.period = RVec::Constant(1, L);
    mask_grid_middle(pair, N, M);
    pair.interior_kind = InteriorKind::Packets;
    pair.shape = {N};
    pair.spacing = RVec::Constant(1, L / N);
    pair.blocks = M;
    SymbolData sym;
    sym.basis = CMat::Zero(n, n);
    sym.modes.resize(n, 1);
    sym.m.resize(n);
    sym.dm.resize(n, 1);
    sym.ddm.resize(n, 1);
    for (int k = 0; k < M; ++k) {
        sym.basis.block(k * N, k * N, N, N) = f;
        for (int q = 0; q < N; ++q) {
            Index c = static_cast<Index>(k) * N + q;
            sym.modes(c, 0) = p(q);
            sym.m(c) = e(k) + p(q) * p(q);
            sym.dm(c, 0) = 2.0 * p(q);
            sym.ddm(c, 0) = 2.0;
        }
    }
    sym.fiber_offset.resize(n);
    for (int k = 0; k < M; ++k) sym.fiber_offset.segment(static_cast<Index>(k) * N, N).setConstant(e(k));
    sym.m_fn = [](const RVec& q) { return q(0) * q(0); };
    sym.grad_fn = [](const RVec& q) { return RVec::Constant(1, 2.0 * q(0)); };
    sym.hess_fn = [](const RVec&) { return RMat::Constant(1, 1, 2.0); };
    pair.exact = std::move(sym);
    pair.params["L_transverse"] = std::to_string(Lt);
    pair.params["M"] = std::to_string(M);
    pair.params["N"] = std::to_string(N);
    pair.params["L_long"] = std::to_string(L);
    return pair;
}

CVec gaussian_packet(const OperatorPair& pair, const RVec& center, const RVec& momentum, double width, int block) {
    const Index n = pair.dim();
    CVec psi = CVec::Zero(n);
    Index per_block = n / std::max(pair.blocks, 1);
    if (block < 0 || block >= std::max(pair.blocks, 1)) throw Error("BadDimension", "packet block out of range");
    for (Index s = 0; s < per_block; ++s) {
        Index site = static_cast<Index>(block) * per_block + s;
        RVec x = pair.position(site);
        double e = 0.0, ph = 0.0;
        for (Index j = 0; j < x.size(); ++j) {
            double dx = x(j) - center(j);
            e += dx * dx;
            ph += momentum(j) * x(j);
        }
        psi(site) = std::polar(std::exp(-e / (4.0 * width * width)), ph);
    }
    double nrm = psi.norm();
    if (nrm == 0.0) throw Error("FilteredToZero", "packet vanished on the grid");
    return psi / nrm;
}

CMat interior_states(const OperatorPair& pair) {
    const Index n = pair.dim();
    if (pair.interior_kind == InteriorKind::BasisVectors) {
        Index k = pair.interior_count();
        CMat s = CMat::Zero(n, k);
        Index c = 0;
        for (Index i = 0; i < n; ++i)
            if (pair.interior_mask[i]) s(i, c++) = 1.0;
        return s;
    }
    // band-limited packets well inside the unwrapped region
    const int N = pair.shape[0];
    const double dx = pair.spacing(0), L = N * dx;
    const double sigma = 6.0 * dx;
    const double pmax = kPi / dx;
    std::vector<CVec> cols;
    for (int b = 0; b < std::max(pair.blocks, 1); ++b)
        for (double c = -0.25 * L; c <= 0.25 * L + 1e-12; c += 2.0 * sigma)
            for (double q = -0.25 * pmax; q <= 0.25 * pmax + 1e-12; q += 2.0 / sigma)
                cols.push_back(gaussian_packet(pair, RVec::Constant(1, c), RVec::Constant(1, q), sigma, b));
    CMat a(n, static_cast<Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) a.col(static_cast<Index>(i)) = cols[i];
    Eigen::HouseholderQR<CMat> qr(a);
    CMat q = qr.householderQ() * CMat::Identity(n, a.cols());
    return q;
}

void dump_matrix_binary(const HermitianOperator& op, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IOError", "cannot write " + path);
    out.write("TMPO", 4);
    std::uint64_t dim = static_cast<std::uint64_t>(op.dim());
    std::uint32_t len = static_cast<std::uint32_t>(op.label.size());
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(op.label.data(), len);
    for (Index i = 0; i < op.dim(); ++i)
        for (Index j = 0; j < op.dim(); ++j) {
            double re = op.m(i, j).real(), im = op.m(i, j).imag();
            out.write(reinterpret_cast<const char*>(&re), sizeof re);
            out.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

HermitianOperator load_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TMPO", 4) != 0) throw Error("IOError", "bad matrix dump " + path);
    std::uint64_t dim = 0;
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string label(len, '\0');
    in.read(label.data(), len);
    CMat m(static_cast<Index>(dim), static_cast<Index>(dim));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            double re = 0.0, im = 0.0;
            in.read(reinterpret_cast<char*>(&re), sizeof re);
            in.read(reinterpret_cast<char*>(&im), sizeof im);
            m(i, j) = cplx(re, im);
        }
    if (!in) throw Error("IOError", "truncated matrix dump " + path);
    return {m, label};
}

void dump_matrix_csv(const HermitianOperator& op, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("IOError", "cannot write " + path);
    out.precision(17);
    out << "dim," << op.dim() << ",label," << op.label << "\n";
    for (Index i = 0; i < op.dim(); ++i) {
        for (Index j = 0; j < op.dim(); ++j)
            out << (j ? "," : "") << op.m(i, j).real() << "," << op.m(i, j).imag();
        out << "\n";
    }
}

std::vector<CatalogEntry> catalog() {
    std::vector<CatalogEntry> out;
    const std::vector<std::pair<std::string, std::string>> rows = {
        {"jacobi_hermite", "constant-velocity Jacobi matrix, H' = 1"},
        {"jacobi_laguerre", "dilation Jacobi matrix, H' = H"},
        {"friedrichs", "H = v.P + V(Q), Phi = Q"},
        {"convolution_zd", "convolution on Z^d, Phi = position"},
        {"dispersive", "H = h(P), Phi = Q"},
        {"adjacency", "admissible layered graph, Phi = level"},
        {"waveguide", "straight waveguide, Phi = longitudinal Q"},
    };
    for (const auto& [id, what] : rows) {
        std::string defaults;
        for (const auto& p : model_schema(id)) defaults += (defaults.empty() ? "" : " ") + p.key + "=" + p.default_value;
        out.push_back({id, what, defaults});
    }
    return out;
}

const std::vector<ModelParam>& model_schema(const std::string& id) {
    static const std::map<std::string, std::vector<ModelParam>> schema = {
        {"jacobi_hermite", {{"N", "512", "section size"}}},
        {"jacobi_laguerre", {{"N", "512", "section size"}}},
        {"friedrichs",
         {{"v", "1", "velocity"},
          {"N", "512", "grid points (power of two)"},
          {"L", "128", "period"},
          {"potential", "none", "none | gauss | cos"},
          {"amplitude", "1", "potential amplitude"}}},
        {"convolution_zd",
         {{"d", "1", "dimension (1 or 2)"},
          {"box", "0", "sites per axis, 0 selects 512 for d=1 and 32 for d=2"},
          {"mu", "nearest", "nearest: 2cos for d=1, square lattice for d=2"}}},
        {"dispersive",
         {{"symbol", "0,0,1", "polynomial coefficients of h"},
          {"N", "512", "grid points (power of two)"},
          {"L", "128", "period"}}},
        {"adjacency",
         {{"pattern", "1,2", "level multiplicities, repeated"},
          {"z_min", "-128", "lowest level"},
          {"z_max", "127", "highest level"},
          {"periodic", "true", "wrap the top level onto the bottom one"},
          {"twist", "pi/2", "phase on the seam edges"}}},
        {"waveguide",
         {{"L_transverse", "pi", "transverse width"},
          {"M", "2", "transverse modes"},
          {"N", "256", "longitudinal grid points (power of two)"},
          {"L_long", "64", "longitudinal period"}}},
    };
    auto it = schema.find(id);
    if (it == schema.end()) throw Error("UnknownModel", "no catalog model '" + id + "'");
    return it->second;
}

std::string size_key(const std::string& id) {
    model_schema(id);
    return id == "convolution_zd" ? "box" : id == "adjacency" ? "z_max" : "N";
}

double parse_real(const std::string& text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    auto number = [&](const std::string& s) {
        if (s == "pi") return kPi;
        if (s == "-pi") return -kPi;
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (s.empty() || used != s.size() || !std::isfinite(v)) throw Error("BadValue", "not a number: '" + text + "'");
        return v;
    };
    auto slash = t.find('/');
    if (slash != std::string::npos) return number(t.substr(0, slash)) / number(t.substr(slash + 1));
    return number(t);
}

std::vector<double> parse_real_list(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) out.push_back(parse_real(item));
    return out;
}

namespace {

int parse_int(const std::string& text) {
    double v = parse_real(text);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw Error("BadValue", "not an integer: '" + text + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error("BadValue", "not a boolean: '" + text + "'");
}

}  // namespace

std::map<std::string, std::string> resolve_params(const std::string& id, const std::map<std::string, std::string>& given) {
    std::map<std::string, std::string> p;
    for (const auto& e : model_schema(id)) p[e.key] = e.default_value;
    for (const auto& [k, v] : given) {
        if (!p.count(k)) throw Error("UnknownParameter", "model " + id + " has no parameter '" + k + "'");
        p[k] = v;
    }
    return p;
}

GraphSpec graph_from_params(const std::map<std::string, std::string>& given) {
    auto p = resolve_params("adjacency", given);
    std::vector<int> pattern;
    for (double m : parse_real_list(p["pattern"])) {
        if (m != std::floor(m)) throw Error("BadValue", "adjacency.pattern needs integers");
        pattern.push_back(static_cast<int>(m));
    }
    return layered_graph(pattern, parse_int(p["z_min"]), parse_int(p["z_max"]), parse_bool(p["periodic"]),
                         parse_real(p["twist"]));
}

OperatorPair build_model(const std::string& id, const std::map<std::string, std::string>& given) {
    auto p = resolve_params(id, given);
    auto num = [&](const std::string& k) {
        try {
            return parse_real(p[k]);
        } catch (const Error& e) {
            throw Error("BadValue", id + "." + k + ": " + e.what());
        }
    };
    auto integer = [&](const std::string& k) {
        try {
            return parse_int(p[k]);
        } catch (const Error& e) {
            throw Error("BadValue", id + "." + k + ": " + e.what());
        }
    };
    if (id == "jacobi_hermite") return build_jacobi_hermite(integer("N"));
    if (id == "jacobi_laguerre") return build_jacobi_laguerre(integer("N"));
    if (id == "friedrichs") {
        const double L = num("L"), a = num("amplitude");
        const std::string kind = p["potential"];
        std::function<double(double)> V;
        if (kind == "gauss") V = [a](double x) { return a * std::exp(-x * x); };
        else if (kind == "cos") V = [a, L](double x) { return a * std::cos(2.0 * kPi * x / L); };
        else if (kind != "none") throw Error("BadValue", "friedrichs.potential must be none, gauss or cos");
        return build_friedrichs(num("v"), V, integer("N"), L, kind == "none" ? "0" : kind);
    }
    if (id == "convolution_zd") {
        const int d = integer("d");
        int box = integer("box");
        if (p["mu"] != "nearest") throw Error("BadValue", "convolution_zd.mu must be nearest");
        if (d == 1) return build_convolution_zd(two_cos(box > 0 ? box : 512));
        if (d == 2) return build_convolution_zd(square_lattice(box > 0 ? box : 32));
        throw Error("BadValue", "convolution_zd.d must be 1 or 2");
    }
    if (id == "dispersive") return build_dispersive(polynomial_symbol(parse_real_list(p["symbol"])), integer("N"), num("L"));
    if (id == "adjacency") return build_adjacency(graph_from_params(given));
    return build_waveguide(num("L_transverse"), integer("M"), integer("N"), num("L_long"));
}

}  // namespace tempo
