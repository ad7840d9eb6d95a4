#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "localisation.hpp"

namespace tempo {

struct ModelConfig {
    std::string id;
    std::map<std::string, std::string> params;
};

struct StateConfig {
    std::string kind = "gaussian";  // gaussian | basis | file
    std::vector<double> center;
    std::vector<double> momentum;
    double width = 2.0;
    int block = 0;
    long index = 0;
    std::string path;
};

struct RunConfig {
    std::vector<std::string> checks;
    std::vector<double> r_list;
    std::vector<double> t_grid;
    std::uint64_t seed = 11;
    std::map<std::string, double> tol;
    int samples = 16;
    double sample_radius = 1.0;
    int states = 20;
    double state_spread = 0.0;
    double state_width = 0.0;
    int windows = 10;
    int rf_points = 100;
    std::vector<int> rf_dims{1, 2, 3};
    std::vector<int> sizes;  // spectral-derivative truncation sizes
    std::vector<double> kappa_expected;
    bool kappa_expected_set = false;
    std::vector<std::string> profiles;  // sojourn profiles, empty means the [profile] section
    bool box_guard = true;
    int reduced_levels = 256;
    int jobs = 1;
};

struct OutputConfig {
    std::string dir = "out";
    std::string format = "both";  // json | csv | both
};

struct ExperimentConfig {
    bool has_model = false;
    ModelConfig model;
    LocalisationProfile profile;
    bool has_state = false;
    StateConfig state;
    SpectralFilter filter;
    RunConfig run;
    OutputConfig output;
    std::string source;

    double tolerance(const std::string& key) const;
};

const std::vector<std::string>& known_checks();
// Tolerance keys (without the tol_ prefix) and their defaults.
const std::map<std::string, double>& default_tolerances();

// Throws ConfigError with "source:line: section.key: message".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
// Cross-field checks: tolerances positive, r_list ascending, checks known, model present when needed.
void validate_config(const ExperimentConfig& cfg);
// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace tempo
