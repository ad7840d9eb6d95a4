#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "models.hpp"

namespace tempo {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        if constexpr (std::is_floating_point_v<T>) os << fmt(v[i]);
        else os << v[i];
    }
    return os.str();
}

struct Where {
    const std::string& source;
    int line;
    std::string field;

    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream os;
        os << source << ":" << line << ": " << field << ": " << msg;
        throw Error("ConfigError", os.str());
    }
};

double real_at(const Where& w, const std::string& v) {
    try {
        return parse_real(v);
    } catch (const Error& e) {
        w.fail(e.what());
    }
}

long int_at(const Where& w, const std::string& v) {
    double x = real_at(w, v);
    if (x != std::floor(x) || std::abs(x) > 9e15) w.fail("expected an integer, got '" + v + "'");
    return static_cast<long>(x);
}

bool bool_at(const Where& w, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    w.fail("expected true or false, got '" + v + "'");
}

std::vector<double> reals_at(const Where& w, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(real_at(w, item));
    return out;
}

// a:b:c expands to a, a+c, ..., b
std::vector<double> grid_at(const Where& w, const std::string& v) {
    if (v.find(':') == std::string::npos) return reals_at(w, v);
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ':')) parts.push_back(trim(item));
    if (parts.size() != 3) w.fail("range must be start:stop:step");
    double a = real_at(w, parts[0]), b = real_at(w, parts[1]), c = real_at(w, parts[2]);
    if (!(c > 0.0) || b < a) w.fail("range needs step > 0 and stop >= start");
    std::vector<double> out;
    long n = static_cast<long>(std::floor((b - a) / c + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(a + c * static_cast<double>(i));
    return out;
}

const std::set<std::string>& section_keys(const std::string& section) {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model", {"id"}},
        {"profile", {"kind", "d", "plateau_radius", "decay_scale", "smooth_order", "rho"}},
        {"state", {"kind", "center", "momentum", "width", "block", "index", "path"}},
        {"filter", {"center", "half_width", "margin", "order"}},
        {"run",
         {"checks", "r_list", "t_grid", "seed", "samples", "sample_radius", "states", "state_spread", "state_width",
          "windows", "rf_points", "rf_dims", "sizes", "kappa_expected", "profiles", "box_guard", "reduced_levels",
          "jobs"}},
        {"output", {"dir", "format"}},
    };
    static const std::set<std::string> none;
    auto it = keys.find(section);
    return it == keys.end() ? none : it->second;
}

}  // namespace

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> c = {"rf",    "commutators", "kappa", "mourre", "ccr", "weyl",
                                               "spectral-derivative", "sojourn", "graph"};
    return c;
}

const std::map<std::string, double>& default_tolerances() {
    static const std::map<std::string, double> t = {
        {"rf", 1e-8},        {"commute", 1e-9},        {"undos", 1e-8},      {"chain", 1e-12},
        {"identity", 1e-8},  {"window", 1e-8},         {"ccr", 1e-6},        {"hermiticity", 1e-6},
        {"weyl", 1e-6},      {"specderiv", 1e-3},      {"specderiv_refined", 3e-4},
        {"sojourn", 0.05},   {"imag", 1e-10},          {"graph_kernel", 1e-12}, {"graph_ccr", 1e-6},
    };
    return t;
}

double ExperimentConfig::tolerance(const std::string& key) const {
    auto it = run.tol.find(key);
    if (it != run.tol.end()) return it->second;
    auto d = default_tolerances().find(key);
    if (d == default_tolerances().end()) throw Error("ConfigError", "no tolerance named '" + key + "'");
    return d->second;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig cfg;
    cfg.source = source;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    std::set<std::string> seen;
    std::map<std::string, int> model_lines;
    bool profile_d_set = false;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        auto hash = s.find_first_of("#;");
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') Where{source, line, s}.fail("unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section_keys(section).empty()) Where{source, line, section}.fail("unknown section");
            if (section == "model") cfg.has_model = true;
            if (section == "state") cfg.has_state = true;
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) Where{source, line, section}.fail("expected key = value");
        std::string key = trim(s.substr(0, eq)), val = trim(s.substr(eq + 1));
        Where w{source, line, section + "." + key};
        if (section.empty()) w.fail("key outside of a section");
        if (!seen.insert(section + "." + key).second) w.fail("duplicate key");
        if (section == "model") {
            if (key == "id") {
                cfg.model.id = val;
                try {
                    model_schema(val);
                } catch (const Error& e) {
                    w.fail(e.what());
                }
            } else {
                cfg.model.params[key] = val;
                model_lines[key] = line;
            }
            continue;
        }
        if (key.rfind("tol_", 0) == 0 && section == "run") {
            std::string name = key.substr(4);
            if (!default_tolerances().count(name)) w.fail("unknown tolerance");
            cfg.run.tol[name] = real_at(w, val);
            continue;
        }
        if (!section_keys(section).count(key)) w.fail("unknown key");
        if (section == "profile") {
            if (key == "kind") {
                try {
                    cfg.profile.kind = profile_kind_from_string(val);
                } catch (const Error& e) {
                    w.fail(e.what());
                }
                if (cfg.profile.kind == ProfileKind::Custom) w.fail("custom profiles are only available through the API");
            } else if (key == "d") {
                cfg.profile.d = static_cast<int>(int_at(w, val));
                profile_d_set = true;
            } else if (key == "plateau_radius") cfg.profile.plateau_radius = real_at(w, val);
            else if (key == "decay_scale") cfg.profile.decay_scale = real_at(w, val);
            else if (key == "smooth_order") cfg.profile.smooth_order = static_cast<int>(int_at(w, val));
            else if (key == "rho") cfg.profile.rho = real_at(w, val);
        } else if (section == "state") {
            if (key == "kind") {
                if (val != "gaussian" && val != "basis" && val != "file") w.fail("expected gaussian, basis or file");
                cfg.state.kind = val;
            } else if (key == "center") cfg.state.center = reals_at(w, val);
            else if (key == "momentum") cfg.state.momentum = reals_at(w, val);
            else if (key == "width") cfg.state.width = real_at(w, val);
            else if (key == "block") cfg.state.block = static_cast<int>(int_at(w, val));
            else if (key == "index") cfg.state.index = int_at(w, val);
            else if (key == "path") cfg.state.path = val;
        } else if (section == "filter") {
            if (key == "center") cfg.filter.center = real_at(w, val);
            else if (key == "half_width") cfg.filter.half_width = real_at(w, val);
            else if (key == "margin") cfg.filter.margin = real_at(w, val);
            else if (key == "order") cfg.filter.order = static_cast<int>(int_at(w, val));
        } else if (section == "run") {
            RunConfig& r = cfg.run;
            if (key == "checks") {
                r.checks = split_list(val);
                for (const auto& c : r.checks)
                    if (std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end())
                        w.fail("unknown check '" + c + "'");
            } else if (key == "r_list") {
                r.r_list = reals_at(w, val);
                for (size_t i = 1; i < r.r_list.size(); ++i)
                    if (!(r.r_list[i] > r.r_list[i - 1])) w.fail("r_list must be strictly ascending");
                for (double x : r.r_list)
                    if (!(x > 0.0)) w.fail("r_list entries must be positive");
            } else if (key == "t_grid") {
                r.t_grid = grid_at(w, val);
            } else if (key == "seed") {
                long v = int_at(w, val);
                if (v < 0) w.fail("seed must be non-negative");
                r.seed = static_cast<std::uint64_t>(v);
            } else if (key == "samples") r.samples = static_cast<int>(int_at(w, val));
            else if (key == "sample_radius") r.sample_radius = real_at(w, val);
            else if (key == "states") r.states = static_cast<int>(int_at(w, val));
            else if (key == "state_spread") r.state_spread = real_at(w, val);
            else if (key == "state_width") r.state_width = real_at(w, val);
            else if (key == "windows") r.windows = static_cast<int>(int_at(w, val));
            else if (key == "rf_points") r.rf_points = static_cast<int>(int_at(w, val));
            else if (key == "rf_dims") {
                r.rf_dims.clear();
                for (double x : reals_at(w, val)) {
                    if (x != 1 && x != 2 && x != 3) w.fail("dimensions must be 1, 2 or 3");
                    r.rf_dims.push_back(static_cast<int>(x));
                }
            } else if (key == "sizes") {
                r.sizes.clear();
                for (const auto& item : split_list(val)) r.sizes.push_back(static_cast<int>(int_at(w, item)));
            } else if (key == "kappa_expected") {
                r.kappa_expected = reals_at(w, val);
                r.kappa_expected_set = true;
            } else if (key == "profiles") {
                r.profiles = split_list(val);
                for (const auto& p : r.profiles) {
                    ProfileKind k;
                    try {
                        k = profile_kind_from_string(p);
                    } catch (const Error& e) {
                        w.fail(e.what());
                    }
                    if (k == ProfileKind::Custom) w.fail("custom profiles are only available through the API");
                }
            } else if (key == "box_guard") r.box_guard = bool_at(w, val);
            else if (key == "reduced_levels") r.reduced_levels = static_cast<int>(int_at(w, val));
            else if (key == "jobs") r.jobs = static_cast<int>(int_at(w, val));
        } else if (section == "output") {
            if (key == "dir") cfg.output.dir = val;
            else if (key == "format") {
                if (val != "json" && val != "csv" && val != "both") w.fail("expected json, csv or both");
                cfg.output.format = val;
            }
        }
    }
    if (cfg.has_model) {
        if (cfg.model.id.empty()) Where{source, line, "model.id"}.fail("missing model id");
        const auto& schema = model_schema(cfg.model.id);
        for (const auto& [k, ln] : model_lines) {
            bool ok = std::any_of(schema.begin(), schema.end(), [&](const ModelParam& p) { return p.key == k; });
            if (!ok) Where{source, ln, "model." + k}.fail("unknown parameter for " + cfg.model.id);
        }
        if (!profile_d_set) {
            int d = 1;
            if (cfg.model.id == "convolution_zd" && cfg.model.params.count("d"))
                d = static_cast<int>(parse_real(cfg.model.params.at("d")));
            cfg.profile.d = d;
        }
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("ConfigError", path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

void validate_config(const ExperimentConfig& cfg) {
    auto fail = [&](const std::string& field, const std::string& msg) {
        throw Error("ConfigError", cfg.source + ": " + field + ": " + msg);
    };
    for (const auto& [k, v] : cfg.run.tol)
        if (!(v > 0.0)) fail("run.tol_" + k, "tolerances must be positive");
    for (size_t i = 1; i < cfg.run.r_list.size(); ++i)
        if (!(cfg.run.r_list[i] > cfg.run.r_list[i - 1])) fail("run.r_list", "r_list must be strictly ascending");
    if (cfg.run.checks.empty()) fail("run.checks", "no checks selected");
    bool model_needed = std::any_of(cfg.run.checks.begin(), cfg.run.checks.end(), [](const std::string& c) { return c != "rf"; });
    if (model_needed && !cfg.has_model) fail("model", "the selected checks need a [model] section");
    auto has = [&](const std::string& c) { return std::find(cfg.run.checks.begin(), cfg.run.checks.end(), c) != cfg.run.checks.end(); };
    if (has("sojourn")) {
        if (cfg.run.r_list.size() < 4) fail("run.r_list", "sojourn needs at least 4 radii");
        if (!cfg.has_state) fail("state", "sojourn needs a [state] section");
    }
    if (has("weyl") && cfg.run.t_grid.empty()) fail("run.t_grid", "weyl needs a time grid");
    if (has("graph") && cfg.has_model && cfg.model.id != "adjacency") fail("run.checks", "graph check needs the adjacency model");
    if (cfg.run.samples < 1 || cfg.run.states < 1 || cfg.run.windows < 1 || cfg.run.rf_points < 1)
        fail("run", "counts must be positive");
    if (!(cfg.run.sample_radius > 0.0)) fail("run.sample_radius", "must be positive");
    if (cfg.run.jobs < 1) fail("run.jobs", "must be positive");
    if (!(cfg.filter.margin > 0.0) || !(cfg.filter.half_width >= 0.0) || cfg.filter.order < 3 || cfg.filter.order % 2 == 0)
        fail("filter", "needs half_width >= 0, margin > 0 and an odd order >= 3");
    if (cfg.has_state && cfg.state.kind == "gaussian" && !(cfg.state.width > 0.0)) fail("state.width", "must be positive");
    if (cfg.has_state && cfg.state.kind == "file" && cfg.state.path.empty()) fail("state.path", "missing");
    try {
        validate_profile(cfg.profile);
    } catch (const Error& e) {
        fail("profile", e.what());
    }
}

std::string to_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    if (cfg.has_model) {
        os << "[model]\nid = " << cfg.model.id << "\n";
        for (const auto& [k, v] : cfg.model.params) os << k << " = " << v << "\n";
        os << "\n";
    }
    const auto& p = cfg.profile;
    os << "[profile]\nkind = " << to_string(p.kind) << "\nd = " << p.d << "\nplateau_radius = " << fmt(p.plateau_radius)
       << "\ndecay_scale = " << fmt(p.decay_scale) << "\nsmooth_order = " << p.smooth_order << "\nrho = " << fmt(p.rho)
       << "\n\n";
    if (cfg.has_state) {
        const auto& s = cfg.state;
        os << "[state]\nkind = " << s.kind << "\n";
        if (s.kind == "gaussian") {
            os << "center = " << join(s.center) << "\nmomentum = " << join(s.momentum) << "\nwidth = " << fmt(s.width)
               << "\nblock = " << s.block << "\n";
        } else if (s.kind == "basis") {
            os << "index = " << s.index << "\n";
        } else {
            os << "path = " << s.path << "\n";
        }
        os << "\n";
    }
    const auto& f = cfg.filter;
    os << "[filter]\ncenter = " << fmt(f.center) << "\nhalf_width = " << fmt(f.half_width) << "\nmargin = " << fmt(f.margin)
       << "\norder = " << f.order << "\n\n";
    const auto& r = cfg.run;
    os << "[run]\nchecks = " << join(r.checks) << "\n";
    if (!r.r_list.empty()) os << "r_list = " << join(r.r_list) << "\n";
    if (!r.t_grid.empty()) os << "t_grid = " << join(r.t_grid) << "\n";
    os << "seed = " << r.seed << "\nsamples = " << r.samples << "\nsample_radius = " << fmt(r.sample_radius)
       << "\nstates = " << r.states << "\nstate_spread = " << fmt(r.state_spread) << "\nstate_width = " << fmt(r.state_width)
       << "\nwindows = " << r.windows << "\nrf_points = " << r.rf_points << "\nrf_dims = " << join(r.rf_dims) << "\n";
    if (!r.sizes.empty()) os << "sizes = " << join(r.sizes) << "\n";
    if (r.kappa_expected_set) os << "kappa_expected = " << join(r.kappa_expected) << "\n";
    if (!r.profiles.empty()) os << "profiles = " << join(r.profiles) << "\n";
    os << "box_guard = " << (r.box_guard ? "true" : "false") << "\nreduced_levels = " << r.reduced_levels
       << "\njobs = " << r.jobs << "\n";
    for (const auto& [k, v] : r.tol) os << "tol_" << k << " = " << fmt(v) << "\n";
    os << "\n[output]\ndir = " << cfg.output.dir << "\nformat = " << cfg.output.format << "\n";
    return os.str();
}

}  // namespace tempo
