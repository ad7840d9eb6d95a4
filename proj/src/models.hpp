#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace tempo {

// Multiplier data for models diagonal in a known Fourier-type basis.
struct SymbolData {
    int d = 1;
    // finitely supported measure for convolution models: site offset -> weight
    std::vector<std::pair<std::vector<int>, cplx>> coeffs;
    CMat basis;   // unitary, columns are the modes
    RMat modes;   // per column momentum (rows) in d components
    RVec m;       // H eigenvalue per column
    RMat dm;      // d_j m per column
    RMat ddm;     // d_j d_k m per column, column index j*d+k
    bool torus = false;
    // per-column constant added to m_fn (transverse energy of fibered models), empty for none
    RVec fiber_offset;
    // continuous symbol for critical-point searches
    std::function<double(const RVec&)> m_fn;
    std::function<RVec(const RVec&)> grad_fn;
    std::function<RMat(const RVec&)> hess_fn;
};

enum class InteriorKind { BasisVectors, Packets };

struct OperatorPair {
    std::string model_id;
    HermitianOperator H;
    std::vector<HermitianOperator> Phi;
    // diagonal entries of Phi_j when Phi is diagonal in the model basis
    std::vector<RVec> phi_diag;
    // wrap period of Phi_j for periodic H (0 means no wrap)
    RVec period;
    std::vector<char> interior_mask;
    std::optional<SymbolData> exact;
    // closed-form derived operators when known
    std::vector<CMat> hp_exact;
    std::vector<CMat> hpp_exact;
    InteriorKind interior_kind = InteriorKind::BasisVectors;
    // grid layout used for packets: sites per axis, spacing, leading block factor
    std::vector<int> shape;
    RVec spacing;
    int blocks = 1;
    std::map<std::string, std::string> params;
    // rebuilds the same model at another truncation size (Jacobi sections)
    std::function<OperatorPair(int)> rebuild;

    int d() const { return static_cast<int>(Phi.size()); }
    Index dim() const { return H.dim(); }
    bool phi_is_diagonal() const { return !phi_diag.empty(); }
    Index interior_count() const;
    RVec position(Index site) const;
};

void validate_pair(const OperatorPair& pair, double interior_floor = 0.5);

OperatorPair build_jacobi_hermite(int N);
OperatorPair build_jacobi_laguerre(int N);

struct ConvolutionSpec {
    int d = 1;
    std::vector<std::pair<std::vector<int>, cplx>> coeffs;
    int box = 64;  // sites per axis
    bool allow_trivial = true;
};

ConvolutionSpec two_cos(int box);
ConvolutionSpec square_lattice(int box);
OperatorPair build_convolution_zd(const ConvolutionSpec& spec);

OperatorPair build_friedrichs(double v, const std::function<double(double)>& V, int N, double L,
                              const std::string& potential_label = "0");

struct DispersiveSymbol {
    std::string label;
    std::function<double(double)> h;
    std::function<double(double)> dh;
    std::function<double(double)> d2h;
};

DispersiveSymbol polynomial_symbol(const std::vector<double>& coeffs);
OperatorPair build_dispersive(const DispersiveSymbol& h, int N, double L);

struct GraphSpec {
    std::vector<int> level;                   // per vertex
    std::vector<std::pair<int, int>> edges;   // (lower vertex, upper vertex)
    std::vector<cplx> weight;                 // H(lower, upper) per edge
    int z_min = 0;
    int z_max = 0;
    bool periodic = false;                    // wrap the top level onto the bottom one
    Index vertices() const { return static_cast<Index>(level.size()); }
};

GraphSpec layered_graph(const std::vector<int>& multiplicity_pattern, int z_min, int z_max, bool periodic,
                        double twist = 0.0);
GraphSpec alternating_graph(int z_min, int z_max, bool periodic, double twist = 0.0);

struct AdmissibilityReport {
    bool pass = true;
    bool index_zero = true;
    bool counts_match = true;
    std::string violation;
    Index pairs_checked = 0;
};

AdmissibilityReport validate_admissible(const GraphSpec& spec);
OperatorPair build_adjacency(const GraphSpec& spec);

OperatorPair build_waveguide(double L_transverse, int M, int N, double L_long);

// Orthonormal columns spanning the states on which truncation-free identities are asserted.
CMat interior_states(const OperatorPair& pair);

// Gaussian packet on the model grid; center and momentum per axis, block selects the leading factor.
CVec gaussian_packet(const OperatorPair& pair, const RVec& center, const RVec& momentum, double width, int block = 0);

void dump_matrix_binary(const HermitianOperator& op, const std::string& path);
void dump_matrix_csv(const HermitianOperator& op, const std::string& path);
HermitianOperator load_matrix_binary(const std::string& path);

struct CatalogEntry {
    std::string model_id;
    std::string section;
    std::string defaults;
};

std::vector<CatalogEntry> catalog();

struct ModelParam {
    std::string key;
    std::string default_value;
    std::string help;
};

// Accepted keys per model id with their defaults; UnknownModel for other ids.
const std::vector<ModelParam>& model_schema(const std::string& model_id);
// Builds a catalog model from string parameters; missing keys take defaults, unknown keys throw UnknownParameter.
OperatorPair build_model(const std::string& model_id, const std::map<std::string, std::string>& params);
// Schema defaults overlaid with the given values; UnknownParameter for keys outside the schema.
std::map<std::string, std::string> resolve_params(const std::string& model_id,
                                                  const std::map<std::string, std::string>& params);
GraphSpec graph_from_params(const std::map<std::string, std::string>& params);
// The parameter that sets the truncation size (N or box).
std::string size_key(const std::string& model_id);

double parse_real(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

}  // namespace tempo
