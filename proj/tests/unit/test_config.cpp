#include "delayid/config.hpp"
#include "delayid/errors.hpp"
#include "delayid/experiment.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace delayid;

namespace {

std::vector<Diagnostic> check(const std::string& text) {
    std::vector<Diagnostic> diags;
    std::istringstream is(text);
    const auto cfg = Config::parse(is, "t.ini", diags);
    if (!has_errors(diags)) read_experiment(cfg, diags);
    return diags;
}

bool has(const std::vector<Diagnostic>& d, int line, const std::string& key, const std::string& fragment) {
    return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) {
        return x.line == line && x.key == key && x.message.find(fragment) != std::string::npos;
    });
}

const char* kMinimal =
    "[experiment]\n"
    "command = fit\n"
    "tables = table2\n"
    "[model]\n"
    "id = logistic\n"
    "[search]\n"
    "tau = 0.1, 2\n";

}  // namespace

TEST_CASE("parser reads sections, keys and comments") {
    std::vector<Diagnostic> diags;
    std::istringstream is("# top\n[a]\nx = 1 ; note\ny=two words\n\n[b.c]\nz = a#b\n");
    const auto cfg = Config::parse(is, "t.ini", diags);
    CHECK(diags.empty());
    CHECK(cfg.sections() == std::vector<std::string>{"a", "b.c"});
    CHECK(cfg.find("a", "x")->text == "1");
    CHECK(cfg.find("a", "y")->text == "two words");
    CHECK(cfg.find("a", "y")->line == 4);
    CHECK(cfg.find("b.c", "z")->text == "a#b");
}

TEST_CASE("parser diagnostics carry line numbers") {
    std::vector<Diagnostic> diags;
    std::istringstream is("[a]\nx = 1\nx = 2\n[a]\nnot a pair\n[bad name]\n");
    Config::parse(is, "t.ini", diags);
    REQUIRE(diags.size() == 4);
    CHECK(diags[0].line == 3);
    CHECK(diags[0].message.find("first at line 2") != std::string::npos);
    CHECK(diags[1].line == 4);
    CHECK(diags[2].line == 5);
    CHECK(diags[3].line == 6);
    CHECK(diags[0].str() == "t.ini:3: error: [a] x: key repeated (first at line 2)");
}

TEST_CASE("a minimal fit config is valid") {
    const auto d = check(kMinimal);
    CHECK_FALSE(has_errors(d));
}

TEST_CASE("unknown keys and sections are errors") {
    const auto d = check(std::string(kMinimal) + "taus = 1\n[extra]\nq = 1\n");
    CHECK(has(d, 8, "taus", "unknown key"));
    CHECK(std::any_of(d.begin(), d.end(), [](const Diagnostic& x) { return x.section == "extra"; }));
}

TEST_CASE("type errors name the offending value") {
    const auto d = check(std::string(kMinimal) + "[data]\nm = ten\nt_end = 1e400\n");
    CHECK(has(d, 9, "m", "expected an integer"));
    CHECK(has_errors(d));
}

TEST_CASE("missing search bounds are reported per method") {
    const auto d = check("[experiment]\ntables = table2\n[model]\nid = logistic\n[sindy]\nmethods = E, P10\n");
    CHECK(std::any_of(d.begin(), d.end(), [](const Diagnostic& x) { return x.key == "tau"; }));
    CHECK(std::any_of(d.begin(), d.end(), [](const Diagnostic& x) { return x.key == "tau_bar"; }));
}

TEST_CASE("a tau_bar bound below the model delay is a warning") {
    const auto d = check(std::string(kMinimal) + "tau_bar = 0.1, 0.5\n[sindy]\nmethods = P5\n");
    CHECK_FALSE(has_errors(d));
    CHECK(std::any_of(d.begin(), d.end(), [](const Diagnostic& x) {
        return x.severity == Diagnostic::Severity::warning && x.key == "tau_bar";
    }));
}

TEST_CASE("dt derives the sample counts") {
    std::vector<Diagnostic> diags;
    std::istringstream is(std::string(kMinimal) + "[data]\nt_end = 35\nboundary = 30\ndt = 0.5\n");
    const auto x = read_experiment(Config::parse(is, "t.ini", diags), diags);
    CHECK_FALSE(has_errors(diags));
    REQUIRE(x.data.m_train);
    CHECK(*x.data.m_train == 61);
    CHECK(x.data.m == 71);
}

TEST_CASE("ndde sections inherit the base section") {
    std::vector<Diagnostic> diags;
    std::istringstream is(
        "[experiment]\ncommand = train-ndde\ntables = table5\n[model]\nid = logistic\n[data]\ndt = 0.5\n"
        "history_span = 2\n[ndde]\nhidden = 7\niters = 10\n[ndde.a]\neta = 0.001\n[ndde.b]\nlabel = bee\n");
    const auto x = read_experiment(Config::parse(is, "t.ini", diags), diags);
    CHECK_FALSE(has_errors(diags));
    REQUIRE(x.ndde.size() == 2);
    CHECK(x.ndde[0].label == "a");
    CHECK(x.ndde[0].hidden == 7);
    CHECK(x.ndde[0].train.eta == 0.001);
    CHECK(x.ndde[1].label == "bee");
    CHECK(x.ndde[1].train.iters == 10);
    CHECK(x.ndde[0].tau_max == 2.0);  // twice the logistic delay
}

TEST_CASE("unreadable config files raise ConfigError") {
    std::vector<Diagnostic> diags;
    CHECK_THROWS_AS(Config::load("/nonexistent/x.ini", diags), ConfigError);
}

TEST_CASE("model parameters and delay keys") {
    CHECK(model_ids().size() == 5);
    CHECK(delay_keys("two_neuron") == std::vector<std::string>{"tau_s", "tau1", "tau2"});
    CHECK(default_params("logistic").at("r") == 1.8);
    CHECK_THROWS_AS(default_params("lorenz"), ParameterError);
}
