#include "delayid/errors.hpp"
#include "delayid/format.hpp"
#include "delayid/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace delayid;

TEST_CASE("format_double round-trips random doubles") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    for (int i = 0; i < 2000; ++i) {
        const double v = std::ldexp(mant(rng), expo(rng));
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("format_scientific uses two significant digits") {
    CHECK(format_scientific(1.234e-4) == "1.2e-04");
    CHECK(format_scientific(7.8e-15) == "7.8e-15");
    CHECK(format_scientific(0.0) == "0.0e+00");
    CHECK(format_scientific(2.8e-3) == "2.8e-03");
}

TEST_CASE("parse_double accepts nan and inf and rejects junk") {
    CHECK(std::isnan(parse_double("nan")));
    CHECK(parse_double("inf") == std::numeric_limits<double>::infinity());
    CHECK(parse_double(" 2.5 ") == 2.5);
    CHECK_THROWS_AS(parse_double("1.0x"), ParameterError);
    CHECK_THROWS_AS(parse_double(""), ParameterError);
}

TEST_CASE("split_csv trims fields") {
    const auto f = split_csv(" a, b ,c,");
    REQUIRE(f.size() == 4);
    CHECK(f[0] == "a");
    CHECK(f[1] == "b");
    CHECK(f[3].empty());
}

TEST_CASE("param_error takes absolute differences of shared keys") {
    const auto e = param_error({{"tau", 1.0}, {"r", 1.8}}, {{"tau", 1.0020}});
    REQUIRE(e.size() == 1);
    CHECK(e.at("tau") == doctest::Approx(0.0020).epsilon(1e-9));
    CHECK(param_error({{"x", 2.0}}, {{"x", 2.0}}).at("x") == 0.0);
}

TEST_CASE("emit_table with no rows writes only the header") {
    CHECK(emit_table({}, "table1") == "sampling,regression,RMSE_dx_train,RMSE_dx,RMSE_x\n");
}

TEST_CASE("table2 header") {
    const std::vector<std::string> want{"SINDy", "optimizer", "|r-r_hat|", "|tau-tau_hat|", "RMSE_dx", "RMSE_x"};
    CHECK(table_header("table2") == want);
}

TEST_CASE("unknown layout is rejected") {
    CHECK_THROWS_AS(emit_table({}, "table42"), ParameterError);
    CHECK_THROWS_AS(table_header("nope"), ParameterError);
}

TEST_CASE("absent values are written as a dash") {
    BenchmarkRow r;
    r.method = "P10";
    r.optimizer = "PS";
    r.param_errors = {{"r", 1e-3}};
    r.rmse_deriv = 2e-4;
    const auto csv = emit_table({r}, "table2");
    CHECK(csv.find("P10,PS,1.0e-03,-,2.0e-04,-\n") != std::string::npos);
}

namespace {

BenchmarkRow random_row(std::mt19937_64& rng, const std::string& layout) {
    std::uniform_real_distribution<double> e(-12.0, 1.0);
    auto val = [&] { return std::pow(10.0, e(rng)); };
    BenchmarkRow r;
    if (layout == "table5" || layout == "table6" || layout == "table7" || layout == "table9") {
        r.method = "NDDE-derivative";
        r.group = "10";
    } else {
        r.method = "P5";
        r.optimizer = "BO";
        r.group = "uniform";
    }
    r.regression = "STLS";
    for (const auto& k : {"tau", "tau1", "tau2", "tau_s", "r", "beta", "gamma", "alpha"}) r.param_errors[k] = val();
    r.rmse_deriv_train = val();
    r.train_loss = val();
    r.rmse_deriv = val();
    r.rmse_traj = val();
    r.calls = 1234;
    r.iters = 8000;
    r.time_s = val();
    return r;
}

}  // namespace

TEST_CASE("emit then parse reproduces the rounded rows for every layout") {
    std::mt19937_64 rng(11);
    for (const auto& layout : table_layouts()) {
        if (layout == "table4") continue;  // pivots optimizers into columns, checked below
        CAPTURE(layout);
        std::vector<BenchmarkRow> rows{random_row(rng, layout), random_row(rng, layout)};
        const std::string csv = emit_table(rows, layout);
        const auto back = parse_table(csv, layout);
        REQUIRE(back.size() == rows.size());
        // A second pass is a fixed point: everything the layout carries survived.
        CHECK(emit_table(back, layout) == csv);
        for (const auto& b : back) CHECK(b == rounded(b));
    }
}

TEST_CASE("table4 places optimizers in their column blocks") {
    BenchmarkRow bf, ps;
    bf.group = ps.group = "logistic";
    bf.method = ps.method = "E";
    bf.optimizer = "BF";
    ps.optimizer = "PS";
    bf.calls = 1000;
    ps.calls = 240;
    const auto csv = emit_table({bf, ps}, "table4");
    const auto header = table_header("table4");
    CHECK(header.front() == "model");
    CHECK(csv.find("1000") != std::string::npos);
    CHECK(csv.find("240") != std::string::npos);
    CHECK(parse_table(csv, "table4").size() == 2);
}

TEST_CASE("validate rejects bad rows") {
    BenchmarkRow ok;
    CHECK_NOTHROW(validate(ok));
    BenchmarkRow a = ok;
    a.method = "Q3";
    CHECK_THROWS_AS(validate(a), ParameterError);
    BenchmarkRow b = ok;
    b.optimizer = "GA";
    CHECK_THROWS_AS(validate(b), ParameterError);
    BenchmarkRow c = ok;
    c.rmse_traj = -1.0;
    CHECK_THROWS_AS(validate(c), ParameterError);
    BenchmarkRow d = ok;
    d.group = "a,b";
    CHECK_THROWS_AS(validate(d), ParameterError);
    BenchmarkRow e = ok;
    e.rmse_deriv = std::nan("");
    CHECK_THROWS_AS(validate(e), ParameterError);
}
