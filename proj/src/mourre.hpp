#pragma once

#include <vector>

#include "commutators.hpp"
#include "linalg.hpp"
#include "models.hpp"
#include "spectral.hpp"

namespace tempo {

struct ConjugateOperatorData {
    std::vector<HermitianOperator> Pi;
    HermitianOperator A;
    HermitianOperator commutator_iHA;
    HermitianOperator identity_rhs;  // <H>^-2 (H')^2 <H>^-2
    double A_asymmetry = 0.0;
    double iHA_min_eigenvalue = 0.0;
};

ConjugateOperatorData build_conjugate(const OperatorPair& pair, const DerivedOperators& derived);

// i[H,A] = <H>^-2 (H')^2 <H>^-2 as forms on the interior states, relative to the norm of the right side.
struct IdentityReport {
    double residual = 0.0;
    double vector_residual = 0.0;  // |(i[H,A] - B) S| without the left compression, includes edge leakage
    double scale = 0.0;            // |B|
};

IdentityReport check_commutator_identity(const OperatorPair& pair, const ConjugateOperatorData& data);

struct WindowResult {
    double lambda = 0.0;
    double delta = 0.0;
    Index columns = 0;
    double a_measured = 0.0;
    double a_predicted = 0.0;
    double inf_weight = 0.0;  // inf <mu>^-4 on the window
    bool pass = false;
};

// Compresses the positive operator of the commutator identity onto E^H((lambda-delta, lambda+delta)).
class MourreWindows {
public:
    MourreWindows(const ConjugateOperatorData& data, const JointSpectralData& spectral, const TupleLayout& layout);
    WindowResult window(double lambda, double delta) const;

private:
    const JointSpectralData& spectral_;
    TupleLayout layout_;
    CMat BU_;
};

WindowResult mourre_window(const ConjugateOperatorData& data, const JointSpectralData& spectral,
                           const TupleLayout& layout, double lambda, double delta);

struct KappaAScan {
    std::vector<CriticalPoint> points;
    std::vector<WindowResult> windows;
    double threshold = 0.0;
    double delta = 0.0;
};

// Windows centered at the eigenvalues of H with half-width twice the local eigenvalue spacing.
KappaAScan kappa_A_scan(const ConjugateOperatorData& data, const JointSpectralData& spectral,
                        const TupleLayout& layout, double delta = 0.0, double threshold = 0.0);

}  // namespace tempo
