#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tempo {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

constexpr cplx I1{0.0, 1.0};

// Every failure carries a short machine-readable code next to the message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct HermitianOperator {
    CMat m;
    std::string label;
    Index dim() const { return m.rows(); }
};

double asymmetry(const CMat& a);
// Validates and symmetrizes; throws NonHermitian past the relative tolerance.
HermitianOperator make_hermitian(CMat m, std::string label, double tol = 1e-12);

double norm2(const CMat& a);
double max_abs(const CMat& a);

struct Eigensystem {
    RVec values;
    CMat vectors;
};

Eigensystem eigh(const HermitianOperator& op);
RVec eigvalsh(const CMat& a);

struct JointSpectralData {
    CMat basis;
    RMat table;  // row i: eigenvalue tuple of column i
    std::vector<std::string> labels;

    Index size() const { return basis.cols(); }
    int index_of(const std::string& label) const;
};

JointSpectralData joint_diagonalize(const std::vector<const HermitianOperator*>& family,
                                    double comm_tol = 1e-8, std::uint64_t seed = 0);

// Tuples are checked against an already known basis (exact Fourier modes etc).
void check_joint(const JointSpectralData& data, const std::vector<const HermitianOperator*>& family,
                 double joint_tol = 1e-8);

using TupleFn = std::function<cplx(const RVec&)>;

CVec eval_on_tuples(const JointSpectralData& data, const std::vector<int>& which, const TupleFn& g);
CMat apply_function(const JointSpectralData& data, const std::vector<int>& which, const TupleFn& g);
CMat from_diag(const CMat& basis, const CVec& d);
CMat from_diag(const CMat& basis, const RVec& d);

// Generalized smoothstep of odd order m = 2k+1.
double smoothstep(int order, double u);
double smoothstep_deriv(int order, double u);

struct SpectralFilter {
    double center = 0.0;
    double half_width = 1.0;
    double margin = 0.5;
    int order = 5;

    double eta(double lambda) const;
    void validate() const;
};

CMat filter_matrix(const JointSpectralData& data, int h_index, const SpectralFilter& filter);
double idempotence_defect(const CMat& eta);

CMat commutator(const CMat& a, const CMat& b);

}  // namespace tempo
