#pragma once

#include <string>
#include <vector>

#include "commutators.hpp"
#include "linalg.hpp"
#include "models.hpp"

namespace tempo {

// Column positions of H, H'_j and H''_jk inside a joint spectral table.
struct TupleLayout {
    int d = 1;
    int h = -1;
    std::vector<int> hp;
    std::vector<int> hpp;  // j*d+k, empty when absent

    bool has_hpp() const { return !hpp.empty(); }
};

TupleLayout layout_of(const JointSpectralData& data, int d);

// Joint eigenbasis of H, H'_j (and H''_jk); symbol models use their Fourier basis directly.
JointSpectralData joint_spectral(const OperatorPair& pair, const DerivedOperators* derived, bool with_hpp,
                                 std::uint64_t seed = 0);

RVec hprime_sq(const JointSpectralData& data, const TupleLayout& layout);

struct CriticalPoint {
    double lambda = 0.0;
    double hprime_sq_min = 0.0;
};

struct CriticalSetEstimate {
    std::vector<CriticalPoint> points;
    double threshold = 0.0;
    double delta = 0.0;
    std::string method;
};

// delta <= 0 and threshold <= 0 select the defaults (diameter/100, 1e-6 max (H')^2).
CriticalSetEstimate kappa_estimate(const JointSpectralData& data, const TupleLayout& layout, double delta = 0.0,
                                   double threshold = 0.0);
CriticalSetEstimate kappa_symbolic(const SymbolData& symbol, int resolution);

// Groups critical spectral values within delta, keeping the argmin of each group.
std::vector<CriticalPoint> group_critical(std::vector<std::pair<double, double>> flagged, double delta);

struct DtState {
    CVec phi;
    double interior_mass = 0.0;
    double phi_weight[3] = {0.0, 0.0, 0.0};  // |<Phi>^t phi| for t = 0, 1, 2
    double retained = 0.0;                   // |eta(H) seed| / |seed|
};

DtState make_Dt_state(const OperatorPair& pair, const JointSpectralData& data, int h_index,
                      const CriticalSetEstimate& kappa, const SpectralFilter& filter, const CVec& seed);

double phi_weight(const OperatorPair& pair, const CVec& phi, int t);
double interior_mass(const OperatorPair& pair, const CVec& phi);

struct KernelSplit {
    CMat K_basis;
    CMat G_basis;
    std::vector<Index> k_columns;
    std::vector<Index> g_columns;
    double tolerance = 0.0;
};

KernelSplit kernel_split(const JointSpectralData& data, const TupleLayout& layout, double tolerance = 1e-10);
// Same split from the eigenvectors of sum_j (H'_j)^2 alone, which resolves the subspaces to rounding accuracy.
KernelSplit kernel_split(const DerivedOperators& derived, double tolerance = 1e-10);

struct ReducedPair {
    OperatorPair pair;
    double h_offblock = 0.0;
    double phi_offblock = 0.0;
    bool phi_reduced = true;
};

ReducedPair reduced_pair(const OperatorPair& pair, const KernelSplit& split);

}  // namespace tempo
