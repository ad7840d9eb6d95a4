#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace tempo {

double asymmetry(const CMat& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

double max_abs(const CMat& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

HermitianOperator make_hermitian(CMat m, std::string label, double tol) {
    if (m.rows() < 1 || m.rows() != m.cols())
        throw Error("BadDimension", label + " must be square with dim >= 1");
    double scale = std::max(max_abs(m), 1e-300);
    double defect = asymmetry(m);
    if (defect > tol * scale) {
        std::ostringstream os;
        os << label << " max asymmetry " << defect << " (relative " << defect / scale << ")";
        throw Error("NonHermitian", os.str());
    }
    CMat sym = 0.5 * (m + m.adjoint());
    return {std::move(sym), std::move(label)};
}

double norm2(const CMat& a) {
    if (a.size() == 0) return 0.0;
    double fro = a.norm();
    if (fro == 0.0) return 0.0;
    if (a.cols() <= 64) {
        Eigen::JacobiSVD<CMat> svd(a);
        return svd.singularValues()(0);
    }
    // deterministic start with every component populated
    CVec x(a.cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = cplx(1.0 + 0.37 * std::sin(1.3 * i), 0.21 * std::cos(0.7 * i));
    x.normalize();
    double est = 0.0;
    for (int it = 0; it < 400; ++it) {
        CVec y = a.adjoint() * (a * x);
        double n = y.norm();
        if (n == 0.0) return 0.0;
        double next = std::sqrt(n);
        x = y / n;
        if (it > 5 && std::abs(next - est) <= 1e-12 * next) {
            est = next;
            break;
        }
        est = next;
    }
    return est;
}

CMat commutator(const CMat& a, const CMat& b) {
    return a * b - b * a;
}

namespace {

Eigensystem zheevd(const CMat& a, bool vectors) {
    // zheevr: the divide-and-conquer driver in the system LAPACK returns wrong vectors for n >= 400
    const Index n = a.rows();
    Eigensystem out;
    out.values.resize(n);
    if (n == 0) return out;
    CMat work = a;
    CMat z(vectors ? n : 1, vectors ? n : 1);
    std::vector<lapack_int> support(2 * static_cast<size_t>(n));
    lapack_int found = 0;
    lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'A', 'L', static_cast<lapack_int>(n),
                                     work.data(), static_cast<lapack_int>(n), 0.0, 0.0, 0, 0, 0.0, &found,
                                     out.values.data(), z.data(), static_cast<lapack_int>(z.rows()),
                                     support.data());
    if (info != 0 || found != n) throw Error("EigenFailure", "zheevr info=" + std::to_string(info));
    if (vectors) out.vectors = std::move(z);
    return out;
}

}  // namespace

Eigensystem eigh(const HermitianOperator& op) {
    double scale = std::max(max_abs(op.m), 1e-300);
    double defect = asymmetry(op.m);
    if (defect > 1e-12 * scale) {
        std::ostringstream os;
        os << op.label << " max asymmetry " << defect;
        throw Error("NonHermitian", os.str());
    }
    return zheevd(op.m, true);
}

RVec eigvalsh(const CMat& a) {
    return zheevd(a, false).values;
}

int JointSpectralData::index_of(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    throw Error("UnknownOperator", "no operator labelled " + label + " in joint data");
}

namespace {

std::vector<std::pair<Index, Index>> split_clusters(const RVec& vals, double tol) {
    std::vector<std::pair<Index, Index>> out;
    Index start = 0;
    for (Index i = 1; i <= vals.size(); ++i) {
        if (i == vals.size() || vals(i) - vals(i - 1) > tol) {
            out.emplace_back(start, i);
            start = i;
        }
    }
    return out;
}

struct Refiner {
    const std::vector<const HermitianOperator*>& family;
    const std::vector<double>& norms;

    void refine(CMat& basis, Index begin, Index end, size_t k) {
        if (end - begin < 2 || k >= family.size()) return;
        if (norms[k] == 0.0) {
            refine(basis, begin, end, k + 1);
            return;
        }
        CMat q = basis.middleCols(begin, end - begin);
        CMat b = q.adjoint() * (family[k]->m * q);
        b = 0.5 * (b + b.adjoint()).eval();
        Eigensystem es = zheevd(b, true);
        basis.middleCols(begin, end - begin) = q * es.vectors;
        for (auto [s, e] : split_clusters(es.values, 1e-8 * norms[k]))
            refine(basis, begin + s, begin + e, k + 1);
    }
};

}  // namespace

JointSpectralData joint_diagonalize(const std::vector<const HermitianOperator*>& family, double comm_tol,
                                    std::uint64_t seed) {
    if (family.empty()) throw Error("EmptyFamily", "joint_diagonalize needs at least one operator");
    const Index n = family.front()->dim();
    std::vector<double> norms;
    for (const auto* op : family) {
        if (op->dim() != n) throw Error("BadDimension", "family members differ in dimension");
        norms.push_back(norm2(op->m));
    }
    for (size_t j = 0; j < family.size(); ++j) {
        for (size_t k = j + 1; k < family.size(); ++k) {
            if (norms[j] == 0.0 || norms[k] == 0.0) continue;
            double res = norm2(commutator(family[j]->m, family[k]->m)) / (norms[j] * norms[k]);
            if (res > comm_tol) {
                std::ostringstream os;
                os << family[j]->label << " and " << family[k]->label << " residual " << res;
                throw Error("NotCommuting", os.str());
            }
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(0.5, 1.5);
    CMat combo = CMat::Zero(n, n);
    double combo_norm = 0.0;
    for (size_t k = 0; k < family.size(); ++k) {
        double c = coef(rng);
        if (norms[k] == 0.0) continue;
        combo += (c / norms[k]) * family[k]->m;
        combo_norm += c;
    }
    combo = 0.5 * (combo + combo.adjoint()).eval();
    Eigensystem es = zheevd(combo, true);

    JointSpectralData out;
    out.basis = std::move(es.vectors);
    double diam = es.values.size() ? es.values(n - 1) - es.values(0) : 0.0;
    double tol = 1e-8 * std::max(diam, 1e-300);
    Refiner ref{family, norms};
    for (auto [s, e] : split_clusters(es.values, tol)) ref.refine(out.basis, s, e, 0);

    out.table.resize(n, static_cast<Index>(family.size()));
    for (size_t k = 0; k < family.size(); ++k) {
        out.labels.push_back(family[k]->label);
        CMat ou = family[k]->m * out.basis;
        for (Index i = 0; i < n; ++i) out.table(i, static_cast<Index>(k)) = out.basis.col(i).dot(ou.col(i)).real();
        for (Index i = 0; i < n; ++i) {
            double r = (ou.col(i) - out.table(i, static_cast<Index>(k)) * out.basis.col(i)).norm();
            if (r > 1e-8 * std::max(norms[k], 1e-300) && norms[k] > 0.0) {
                std::ostringstream os;
                os << "column " << i << " of " << family[k]->label << " residual " << r / norms[k];
                throw Error("DegeneracyUnresolved", os.str());
            }
        }
    }
    return out;
}

void check_joint(const JointSpectralData& data, const std::vector<const HermitianOperator*>& family,
                 double joint_tol) {
    for (size_t k = 0; k < family.size(); ++k) {
        double nk = norm2(family[k]->m);
        if (nk == 0.0) continue;
        CMat r = family[k]->m * data.basis - data.basis * data.table.col(static_cast<Index>(k)).asDiagonal();
        double worst = r.colwise().norm().maxCoeff();
        if (worst > joint_tol * nk) {
            std::ostringstream os;
            os << family[k]->label << " residual " << worst / nk;
            throw Error("NotJointlyDiagonalized", os.str());
        }
    }
}

CVec eval_on_tuples(const JointSpectralData& data, const std::vector<int>& which, const TupleFn& g) {
    const Index n = data.size();
    CVec d(n);
    RVec tuple(static_cast<Index>(which.size()));
    for (Index i = 0; i < n; ++i) {
        for (size_t j = 0; j < which.size(); ++j) {
            if (which[j] < 0 || which[j] >= data.table.cols())
                throw Error("DomainError", "operator index out of range");
            tuple(static_cast<Index>(j)) = data.table(i, which[j]);
        }
        d(i) = g(tuple);
        if (!std::isfinite(d(i).real()) || !std::isfinite(d(i).imag())) {
            std::ostringstream os;
            os << "non-finite value at tuple (";
            for (Index j = 0; j < tuple.size(); ++j) os << (j ? "," : "") << tuple(j);
            os << ")";
            throw Error("DomainError", os.str());
        }
    }
    return d;
}

CMat from_diag(const CMat& basis, const CVec& d) {
    return basis * d.asDiagonal() * basis.adjoint();
}

CMat from_diag(const CMat& basis, const RVec& d) {
    CMat out = basis * d.asDiagonal() * basis.adjoint();
    return 0.5 * (out + out.adjoint());
}

CMat apply_function(const JointSpectralData& data, const std::vector<int>& which, const TupleFn& g) {
    CVec d = eval_on_tuples(data, which, g);
    if (d.imag().cwiseAbs().maxCoeff() == 0.0) return from_diag(data.basis, RVec(d.real()));
    return from_diag(data.basis, d);
}

double smoothstep(int order, double u) {
    if (order < 3 || order % 2 == 0) throw Error("BadFilter", "smoothstep order must be odd and >= 3");
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const int k = (order - 1) / 2;
    auto binom = [](int n, int r) {
        double b = 1.0;
        for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
        return b;
    };
    double s = 0.0;
    for (int n = 0; n <= k; ++n) s += binom(k + n, n) * binom(2 * k + 1, k - n) * std::pow(-u, n);
    return s * std::pow(u, k + 1);
}

double smoothstep_deriv(int order, double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const int k = (order - 1) / 2;
    double c = 1.0;
    for (int i = k + 1; i <= 2 * k + 1; ++i) c *= i;
    for (int i = 1; i <= k; ++i) c /= i;
    return c * std::pow(u * (1.0 - u), k);
}

double SpectralFilter::eta(double lambda) const {
    double u = (std::abs(lambda - center) - half_width) / margin;
    return 1.0 - smoothstep(order, u);
}

void SpectralFilter::validate() const {
    if (!(half_width >= 0.0) || !(margin > 0.0)) throw Error("BadFilter", "half_width >= 0 and margin > 0 required");
    if (order < 3 || order % 2 == 0) throw Error("BadFilter", "filter order must be odd and >= 3");
}

CMat filter_matrix(const JointSpectralData& data, int h_index, const SpectralFilter& filter) {
    filter.validate();
    return apply_function(data, {h_index}, [&](const RVec& t) { return cplx(filter.eta(t(0)), 0.0); });
}

double idempotence_defect(const CMat& eta) {
    return norm2(eta * eta - eta);
}

}  // namespace tempo
