#pragma once

#include <string>
#include <vector>

#include "linalg.hpp"
#include "models.hpp"

namespace tempo {

struct DerivedOperators {
    int d = 1;
    std::vector<HermitianOperator> Hp;    // H'_j
    std::vector<HermitianOperator> Hpp;   // H''_{jk} at j*d+k
    std::vector<HermitianOperator> Hppp;  // H'''_{jkl} at (j*d+k)*d+l, depth 3 only
    std::string provenance;               // matrix_commutator | symbol_derivative | closed_form | minimal_image
    double asymmetry_defect = 0.0;        // largest defect removed by symmetrization
    double route_gap = -1.0;              // interior gap between matrix and exact routes, -1 if not compared

    const HermitianOperator& hpp(int j, int k) const { return Hpp[static_cast<size_t>(j * d + k)]; }
};

// Literal i[X, Phi_k] chain.
DerivedOperators matrix_chain(const OperatorPair& pair, int depth);
// Truncation-free chain: symbol multipliers, closed forms, or wrapped displacements.
DerivedOperators exact_chain(const OperatorPair& pair, int depth);
// Exact route where available, cross-checked against the matrix route on interior states.
DerivedOperators commutator_chain(const OperatorPair& pair, int depth, bool cross_check = true);

double interior_norm(const CMat& a, const CMat& states);

HermitianOperator conjugate_H(const OperatorPair& pair, const RVec& x);
HermitianOperator conjugate(const OperatorPair& pair, const HermitianOperator& op, const RVec& x);

// e^{-ix.Phi} X e^{ix.Phi} for H and H'_j through the truncation-free route matching exact_chain: shifted symbol,
// linear closed form, minimal-image phases, or (Jacobi sections) a padded section compressed back.
class Conjugator {
public:
    Conjugator(const OperatorPair& pair, double radius, bool literal = false);

    HermitianOperator H(const RVec& x) const;
    HermitianOperator Hp(int j, const RVec& x, const DerivedOperators& derived) const;
    const std::string& route() const { return route_; }
    Index padded_dim() const { return route_ == "padded_section" ? big_.dim() : pair_.dim(); }

private:
    HermitianOperator compress(const CMat& big_op, const std::string& label, const RVec& x) const;
    HermitianOperator phased(const CMat& op, const std::string& label, const RVec& x) const;

    const OperatorPair& pair_;
    std::string route_ = "literal";
    OperatorPair big_;
    std::vector<CMat> big_hp_;
    Eigensystem phi_eig_;
};

struct ResidualReport {
    std::string name;
    std::string route;
    double max_residual = 0.0;
    // same check with the literal phase conjugation on the truncated space, -1 if not computed
    double seam_residual = -1.0;
    std::string argmax;
    std::vector<double> residuals;
};

ResidualReport check_commute_family(const OperatorPair& pair, const std::vector<RVec>& xs);
ResidualReport check_undos(const OperatorPair& pair, const DerivedOperators& derived, const std::vector<RVec>& xs);
double max_radius(const std::vector<RVec>& xs);

struct VirialCluster {
    double lambda = 0.0;
    Index size = 0;
    Index localized = 0;
    double compression = 0.0;
};

struct VirialReport {
    std::vector<VirialCluster> clusters;
    double max_compression = 0.0;
};

VirialReport virial_check(const OperatorPair& pair, const DerivedOperators& derived, const JointSpectralData& spectral,
                          int h_index, double tol = 1e-10);

std::vector<RVec> sample_shifts(int d, int count, double radius, std::uint64_t seed);

}  // namespace tempo
