#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tempo/tempo.h"

namespace {

struct Options {
    std::string config;
    std::string preset;
    std::string out;
    std::string format;
    long long seed = -1;
    int jobs = 0;
};

int report_error(const char* what) {
    std::cerr << "tempo: " << what << ": " << tempo_last_error() << "\n";
    return 1;
}

std::string take(char* s) {
    std::string r = s ? s : "";
    tempo_string_free(s);
    return r;
}

void print_report(const tempo_report* rep) {
    const size_t n = tempo_report_check_count(rep);
    for (size_t i = 0; i < n; ++i) {
        tempo_check_info info;
        tempo_report_check(rep, i, &info);
        std::printf("%s %-36s", info.pass ? "PASS" : "FAIL", info.name);
        for (size_t j = 0; j < info.residual_count; ++j) {
            const char* key;
            double v;
            tempo_report_residual(rep, i, j, &key, &v);
            std::printf(" %s=%.6g", key, v);
        }
        std::printf(" tol=%.3g", info.tolerance);
        if (info.note[0]) std::printf("  (%s)", info.note);
        std::printf("\n");
    }
    std::printf("%s\n", tempo_report_pass(rep) ? "all checks passed" : "some checks failed");
}

int run(const Options& o, const char* only_check) {
    tempo_config* cfg = nullptr;
    tempo_status st;
    if (!o.preset.empty())
        st = tempo_config_preset(o.preset.c_str(), &cfg);
    else if (!o.config.empty())
        st = tempo_config_load(o.config.c_str(), &cfg);
    else {
        std::cerr << "tempo: one of --config or --preset is required\n";
        return 1;
    }
    if (st != TEMPO_OK) return report_error("config");
    struct Guard {
        tempo_config* c;
        ~Guard() { tempo_config_free(c); }
    } guard{cfg};
    if (o.seed >= 0) tempo_config_set_seed(cfg, static_cast<uint64_t>(o.seed));
    if (o.jobs > 0 && tempo_config_set_jobs(cfg, o.jobs) != TEMPO_OK) return report_error("config");
    if (tempo_config_set_output(cfg, o.out.empty() ? nullptr : o.out.c_str(),
                                o.format.empty() ? nullptr : o.format.c_str()) != TEMPO_OK)
        return report_error("config");
    if (only_check && tempo_config_set_checks(cfg, only_check) != TEMPO_OK) return report_error("config");

    tempo_report* rep = nullptr;
    if (tempo_run(cfg, &rep) != TEMPO_OK) return report_error("run");
    print_report(rep);
    const bool pass = tempo_report_pass(rep) != 0;
    st = tempo_report_write(rep);
    tempo_report_free(rep);
    if (st != TEMPO_OK) return report_error("write");
    return pass ? 0 : 2;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "shipped preset name instead of a config file");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "report formats")->check(CLI::IsMember({"json", "csv", "both"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time operators of conjugate pairs: verification runs"};
    app.set_version_flag("--version", tempo_version());
    app.require_subcommand(1);

    Options o;
    int code = 0;

    auto* run_cmd = app.add_subcommand("run", "run the checks selected in a config");
    add_common(run_cmd, o);
    run_cmd->callback([&] { code = run(o, nullptr); });

    for (const char* check : {"rf", "kappa", "mourre", "ccr", "weyl", "sojourn"}) {
        auto* sub = app.add_subcommand(check, std::string("run only the ") + check + " check");
        add_common(sub, o);
        sub->callback([&, check] { code = run(o, check); });
    }

    auto* cat = app.add_subcommand("list-catalog", "list models and their default parameters");
    cat->callback([&] {
        char* text = nullptr;
        if (tempo_catalog_text(&text) != TEMPO_OK) {
            code = report_error("catalog");
            return;
        }
        std::cout << take(text);
    });

    std::string preset_name, preset_out;
    bool list_presets = false;
    auto* emit = app.add_subcommand("emit-preset", "write the config of a shipped scenario");
    emit->add_option("name", preset_name, "preset name");
    emit->add_option("-o,--output", preset_out, "file to write instead of stdout");
    emit->add_flag("--list", list_presets, "list preset names");
    emit->callback([&] {
        if (list_presets || preset_name.empty()) {
            for (size_t i = 0; i < tempo_preset_count(); ++i) std::cout << tempo_preset_name(i) << "\n";
            return;
        }
        char* text = nullptr;
        if (tempo_preset_text(preset_name.c_str(), &text) != TEMPO_OK) {
            code = report_error("emit-preset");
            return;
        }
        std::string body = take(text);
        if (preset_out.empty()) {
            std::cout << body;
            return;
        }
        std::ofstream f(preset_out);
        if (!(f << body)) {
            std::cerr << "tempo: cannot write " << preset_out << "\n";
            code = 1;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    return code;
}
