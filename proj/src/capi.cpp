#include "tempo/tempo.h"

#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>
#include <string>

#include "config.hpp"
#include "experiment.hpp"

extern "C" {
struct tempo_config {
    tempo::ExperimentConfig rep;
};
struct tempo_report {
    tempo::VerificationReport rep;
    tempo::OutputConfig output;
};
}

namespace {

thread_local std::string last_error;
thread_local std::string last_code;

tempo_status classify(const std::string& code) {
    static const std::set<std::string> config = {"ConfigError", "BadValue", "BadFilter", "BadProfile",
                                                  "UnknownParameter", "UnknownPreset", "BadDimension"};
    static const std::set<std::string> model = {"UnknownModel", "UnsupportedModel", "NotAdmissible", "NonHermitian",
                                                "NotCommuting", "ZeroVelocity", "UnknownOperator", "NotEven"};
    if (config.count(code)) return TEMPO_ERR_CONFIG;
    if (model.count(code)) return TEMPO_ERR_MODEL;
    if (code == "IOError") return TEMPO_ERR_IO;
    return TEMPO_ERR_NUMERIC;
}

tempo_status fail(tempo_status s, const std::string& code, const std::string& msg) {
    last_code = code;
    last_error = msg;
    return s;
}

template <class F>
tempo_status guarded(F&& f) {
    last_error.clear();
    last_code.clear();
    try {
        f();
        return TEMPO_OK;
    } catch (const tempo::Error& e) {
        return fail(classify(e.code()), e.code(), e.what());
    } catch (const std::bad_alloc&) {
        return fail(TEMPO_ERR_INTERNAL, "OutOfMemory", "out of memory");
    } catch (const std::exception& e) {
        return fail(TEMPO_ERR_INTERNAL, "Internal", e.what());
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

tempo_status null_arg(const char* what) { return fail(TEMPO_ERR_ARGUMENT, "BadArgument", std::string(what) + " is null"); }

}  // namespace

extern "C" {

const char* tempo_version(void) { return tempo::tool_version(); }
const char* tempo_last_error(void) { return last_error.c_str(); }
const char* tempo_last_error_code(void) { return last_code.c_str(); }
void tempo_string_free(char* s) { std::free(s); }

tempo_status tempo_config_parse(const char* text, const char* source, tempo_config** out) {
    if (!text || !out) return null_arg("text/out");
    return guarded([&] {
        auto c = tempo::parse_config(text, source ? source : "<config>");
        tempo::validate_config(c);
        *out = new tempo_config{std::move(c)};
    });
}

tempo_status tempo_config_load(const char* path, tempo_config** out) {
    if (!path || !out) return null_arg("path/out");
    return guarded([&] {
        auto c = tempo::load_config(path);
        tempo::validate_config(c);
        *out = new tempo_config{std::move(c)};
    });
}

tempo_status tempo_config_preset(const char* name, tempo_config** out) {
    if (!name || !out) return null_arg("name/out");
    return guarded([&] {
        auto c = tempo::parse_config(tempo::preset_text(name), std::string("preset:") + name);
        tempo::validate_config(c);
        *out = new tempo_config{std::move(c)};
    });
}

tempo_status tempo_config_set_seed(tempo_config* cfg, uint64_t seed) {
    if (!cfg) return null_arg("cfg");
    cfg->rep.run.seed = seed;
    return TEMPO_OK;
}

tempo_status tempo_config_set_jobs(tempo_config* cfg, int jobs) {
    if (!cfg) return null_arg("cfg");
    if (jobs < 1) return fail(TEMPO_ERR_CONFIG, "ConfigError", "jobs must be at least 1");
    cfg->rep.run.jobs = jobs;
    return TEMPO_OK;
}

tempo_status tempo_config_set_checks(tempo_config* cfg, const char* checks) {
    if (!cfg || !checks) return null_arg("cfg/checks");
    return guarded([&] {
        tempo::ExperimentConfig c = cfg->rep;
        c.run.checks.clear();
        std::istringstream in(checks);
        std::string item;
        while (std::getline(in, item, ',')) {
            auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
            if (b != std::string::npos) c.run.checks.push_back(item.substr(b, e - b + 1));
        }
        tempo::validate_config(c);
        cfg->rep = std::move(c);
    });
}

tempo_status tempo_config_set_output(tempo_config* cfg, const char* dir, const char* format) {
    if (!cfg) return null_arg("cfg");
    if (format && std::strcmp(format, "json") && std::strcmp(format, "csv") && std::strcmp(format, "both"))
        return fail(TEMPO_ERR_CONFIG, "ConfigError", std::string("unknown output format '") + format + "'");
    if (dir) cfg->rep.output.dir = dir;
    if (format) cfg->rep.output.format = format;
    return TEMPO_OK;
}

tempo_status tempo_config_text(const tempo_config* cfg, char** out) {
    if (!cfg || !out) return null_arg("cfg/out");
    return guarded([&] { *out = dup(tempo::to_text(cfg->rep)); });
}

void tempo_config_free(tempo_config* cfg) { delete cfg; }

tempo_status tempo_run(const tempo_config* cfg, tempo_report** out) {
    if (!cfg || !out) return null_arg("cfg/out");
    return guarded([&] { *out = new tempo_report{tempo::run_experiment(cfg->rep), cfg->rep.output}; });
}

int tempo_report_pass(const tempo_report* rep) { return rep && rep->rep.pass() ? 1 : 0; }

size_t tempo_report_check_count(const tempo_report* rep) { return rep ? rep->rep.checks.size() : 0; }

tempo_status tempo_report_check(const tempo_report* rep, size_t i, tempo_check_info* out) {
    if (!rep || !out) return null_arg("rep/out");
    if (i >= rep->rep.checks.size()) return fail(TEMPO_ERR_ARGUMENT, "BadArgument", "check index out of range");
    const auto& c = rep->rep.checks[i];
    *out = tempo_check_info{c.name.c_str(), c.anchor.c_str(), c.note.c_str(), c.tolerance,
                            c.pass ? 1 : 0,  c.expected_failure ? 1 : 0, c.residuals.size()};
    return TEMPO_OK;
}

tempo_status tempo_report_residual(const tempo_report* rep, size_t i, size_t j, const char** key, double* value) {
    if (!rep || !key || !value) return null_arg("rep/key/value");
    if (i >= rep->rep.checks.size() || j >= rep->rep.checks[i].residuals.size())
        return fail(TEMPO_ERR_ARGUMENT, "BadArgument", "residual index out of range");
    *key = rep->rep.checks[i].residuals[j].first.c_str();
    *value = rep->rep.checks[i].residuals[j].second;
    return TEMPO_OK;
}

tempo_status tempo_report_json(const tempo_report* rep, int with_timing, char** out) {
    if (!rep || !out) return null_arg("rep/out");
    return guarded([&] { *out = dup(tempo::report_json(rep->rep, with_timing != 0)); });
}

tempo_status tempo_report_write(const tempo_report* rep) {
    if (!rep) return null_arg("rep");
    return guarded([&] { tempo::write_outputs(rep->rep, rep->output); });
}

void tempo_report_free(tempo_report* rep) { delete rep; }

size_t tempo_preset_count(void) { return tempo::preset_names().size(); }

const char* tempo_preset_name(size_t i) {
    const auto& n = tempo::preset_names();
    return i < n.size() ? n[i].c_str() : nullptr;
}

tempo_status tempo_preset_text(const char* name, char** out) {
    if (!name || !out) return null_arg("name/out");
    return guarded([&] { *out = dup(tempo::preset_text(name)); });
}

tempo_status tempo_catalog_text(char** out) {
    if (!out) return null_arg("out");
    return guarded([&] { *out = dup(tempo::catalog_text()); });
}

}
