#pragma once

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace tempo {

struct CheckRecord {
    std::string name;
    std::string anchor;
    std::vector<std::pair<std::string, double>> residuals;
    double tolerance = 0.0;
    bool pass = false;
    bool expected_failure = false;  // passes when the property is absent, as predicted
    std::string note;

    double residual(const std::string& key) const;
};

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct VerificationReport {
    std::string tool_version;
    std::string config_text;
    std::vector<CheckRecord> checks;
    std::vector<Table> tables;
    std::vector<PlotSeries> plots;
    std::vector<std::pair<std::string, double>> timing;  // seconds per stage

    bool pass() const;
    const CheckRecord* find(const std::string& name) const;
    const Table* table(const std::string& name) const;
};

const char* tool_version();

// Runs the selected checks in dependency order: model, commutators, spectral data, then the checks.
VerificationReport run_experiment(const ExperimentConfig& cfg);

// Timing fields are left out when with_timing is false so reruns compare byte for byte.
std::string report_json(const VerificationReport& report, bool with_timing = true);
// Writes report.json, one CSV per table and one .dat per plot series; returns the written paths.
std::vector<std::string> write_outputs(const VerificationReport& report, const OutputConfig& out);

const std::vector<std::string>& preset_names();
// Self-contained config text for a shipped scenario; UnknownPreset otherwise.
std::string preset_text(const std::string& name);
std::string catalog_text();

}  // namespace tempo
