#include <doctest.h>

#include "config.hpp"
#include "experiment.hpp"

using namespace tempo;

namespace {

std::string error_of(const std::string& text) {
    try {
        validate_config(parse_config(text, "t.ini"));
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config errors name the line and field") {
    auto msg = error_of("[model]\nid = convolution_zd\n[state]\ncenter = 0\nmomentum = 1\n[run]\nchecks = sojourn\nr_list = 10, 40, 20, 80\n");
    CHECK(msg.find("ConfigError") != std::string::npos);
    CHECK(msg.find("t.ini:8") != std::string::npos);
    CHECK(msg.find("run.r_list") != std::string::npos);
    CHECK(error_of("[run]\nchecks = rf\nbogus = 1\n").find("run.bogus") != std::string::npos);
    CHECK(error_of("[run]\nchecks = rf\nchecks = rf\n").find("duplicate") != std::string::npos);
    CHECK(error_of("[model]\nid = dispersive\nbox = 3\n[run]\nchecks = kappa\n").find("box") != std::string::npos);
    CHECK_FALSE(error_of("[run]\nchecks = rf\ntol_rf = -1\n").empty());
    CHECK_FALSE(error_of("[run]\nchecks = kappa\n").empty());
    CHECK_FALSE(error_of("[run]\nchecks = teleport\n").empty());
    CHECK(error_of("# comment\n[run]\nchecks = rf ; trailing\n").empty());
}

TEST_CASE("every preset parses, validates and round-trips through the canonical text") {
    CHECK(preset_names().size() == 17);
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        auto cfg = parse_config(preset_text(name), name);
        CHECK_NOTHROW(validate_config(cfg));
        CHECK(to_text(parse_config(to_text(cfg))) == to_text(cfg));
    }
    CHECK_THROWS_AS(preset_text("nope"), Error);
}

TEST_CASE("sojourn preset carries the shipped scenario") {
    auto cfg = parse_config(preset_text("sojourn-2cos"));
    CHECK(cfg.model.id == "convolution_zd");
    CHECK(cfg.model.params.at("box") == "1024");
    CHECK(cfg.run.r_list == std::vector<double>{10, 20, 40, 80});
    CHECK(cfg.tolerance("sojourn") == 0.05);
}

TEST_CASE("rf-only run reports Euler residuals and passes") {
    auto rep = run_experiment(parse_config(preset_text("rf-radial")));
    CHECK(rep.pass());
    REQUIRE(rep.find("rf.euler[d=2]"));
    CHECK(rep.find("rf.euler[d=2]")->residual("quadrature") < 1e-8);
    CHECK(report_json(rep, false) == report_json(run_experiment(parse_config(preset_text("rf-radial"))), false));
}
