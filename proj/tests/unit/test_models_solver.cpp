#include "delayid/errors.hpp"
#include "delayid/models.hpp"
#include "delayid/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace delayid;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// x'(t) = -x(t - 1) with x = 1 on [-1, 0]; the solution is a polynomial on
// every unit interval.
double pure_delay_exact(double t) {
    if (t <= 0) return 1.0;
    if (t <= 1) return 1.0 - t;
    if (t <= 2) return 1.0 - t + 0.5 * (t - 1) * (t - 1);
    return 1.0 - t + 0.5 * (t - 1) * (t - 1) - (t - 2) * (t - 2) * (t - 2) / 6.0;
}

DdeSystem pure_delay() {
    DdeSystem s;
    s.n = 1;
    s.delays = {1.0};
    s.rhs = [](double, const Vec&, const std::vector<Vec>& d, double) { return Vec(-d[0]); };
    s.label = "pure delay";
    return s;
}

}  // namespace

TEST_CASE("logistic right-hand side") {
    const auto sys = make_logistic({});
    const Vec dx = sys(0.0, v1(2.0), {v1(5.0)});
    CHECK(dx[0] == doctest::Approx(1.8 * 2.0 * (1.0 - 5.0 / 10.0)));
}

TEST_CASE("Mackey-Glass right-hand side") {
    const auto sys = make_mackey_glass({});
    const double v = 1.3, x = 0.7;
    const Vec dx = sys(0.0, v1(x), {v1(v)});
    CHECK(dx[0] == doctest::Approx(4.0 * v / (1.0 + std::pow(v, 9.6)) - 2.0 * x));
}

TEST_CASE("benchmark systems have sorted positive delays") {
    for (const auto& s : {make_logistic({}), make_mackey_glass({}), make_two_neuron({}), make_climate({}),
                          make_rossler({})}) {
        CAPTURE(s.label);
        CHECK_NOTHROW(validate_system(s));
        for (std::size_t i = 1; i < s.delays.size(); ++i) CHECK(s.delays[i - 1] < s.delays[i]);
    }
}

TEST_CASE("invalid parameters are rejected") {
    LogisticParams p;
    p.tau = -1.0;
    CHECK_THROWS_AS(make_logistic(p), ParameterError);
    MackeyGlassParams m;
    m.gamma = -2.0;
    CHECK_THROWS(make_mackey_glass(m));
}

TEST_CASE("climate saturation is continuous and odd-limited") {
    CHECK(climate_saturation(11.0, 2.0, -0.4, 0.0) == 0.0);
    CHECK(climate_saturation(11.0, 2.0, -0.4, 10.0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(climate_saturation(11.0, 2.0, -0.4, -10.0) == doctest::Approx(-0.4).epsilon(1e-6));
    const double eps = 1e-9;
    CHECK(std::abs(climate_saturation(11.0, 2.0, -0.4, eps) - climate_saturation(11.0, 2.0, -0.4, -eps)) < 1e-7);
}

TEST_CASE("method of steps is exact on piecewise polynomial solutions") {
    const auto sol = solve_dde(pure_delay(), HistorySpec::constant(v1(1.0), 1.0), {0.01, 0.0, 3.0});
    for (double t : {0.5, 1.0, 1.37, 2.0, 2.5, 3.0}) {
        CAPTURE(t);
        CHECK(std::abs(sol.value(t)[0] - pure_delay_exact(t)) < 1e-12);
    }
    // Dense output before t0 falls back to the history.
    CHECK(sol.value(-0.5)[0] == 1.0);
}

TEST_CASE("RK4 converges with fourth order on the logistic DDE") {
    const auto sys = make_logistic({});
    const auto h = HistorySpec::constant(v1(0.5), 1.0);
    const auto ref = solve_dde(sys, h, {1e-4, 0.0, 10.0});
    auto err = [&](double step) {
        const auto s = solve_dde(sys, h, {step, 0.0, 10.0});
        double e = 0.0;
        for (double t = 0.0; t <= 10.0 + 1e-9; t += 0.5) e = std::max(e, std::abs(s.value(t)[0] - ref.value(t)[0]));
        return e;
    };
    const double e1 = err(0.04), e2 = err(0.02);
    const double order = std::log2(e1 / e2);
    CAPTURE(e1);
    CAPTURE(e2);
    CHECK(order > 3.5);
    CHECK(order < 5.0);
}

TEST_CASE("ODE solver order on x' = -x") {
    auto err = [](double step) {
        const auto s = solve_ode([](double, const Vec& x) { return Vec(-x); }, v1(1.0), {step, 0.0, 2.0});
        return std::abs(s.value(2.0)[0] - std::exp(-2.0));
    };
    const double order = std::log2(err(0.1) / err(0.05));
    CHECK(order == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("Hermite history is exact on cubics") {
    auto f = [](double s) { return 1.0 + s - 2 * s * s + 0.5 * s * s * s; };
    auto df = [](double s) { return 1.0 - 4 * s + 1.5 * s * s; };
    std::vector<double> t{-2.0, -1.3, -0.6, 0.0};
    Mat x(4, 1), dx(4, 1);
    for (int i = 0; i < 4; ++i) {
        x(i, 0) = f(t[static_cast<std::size_t>(i)]);
        dx(i, 0) = df(t[static_cast<std::size_t>(i)]);
    }
    const auto h = HistorySpec::sampled(t, x, dx);
    for (double s = -2.0; s <= 0.0; s += 0.07) {
        CHECK(h.value(s)[0] == doctest::Approx(f(s)).epsilon(1e-12));
        CHECK(h.derivative(s)[0] == doctest::Approx(df(s)).epsilon(1e-11));
    }
    CHECK_THROWS_AS(h.value(-2.5), DomainError);
}

TEST_CASE("sampled history without derivatives interpolates linearly") {
    const auto h = HistorySpec::sampled({-1.0, 0.0}, (Mat(2, 1) << 3.0, 5.0).finished());
    CHECK(h.value(-0.25)[0] == doctest::Approx(4.5));
}

TEST_CASE("cosine history") {
    const auto h = HistorySpec::cosine(2, 1.0);
    CHECK(h.value(0.0).size() == 2);
    CHECK(std::isfinite(h.value(-1.0)[0]));
}

TEST_CASE("solver reports divergence") {
    DdeSystem s;
    s.n = 1;
    s.delays = {1.0};
    s.rhs = [](double, const Vec& x, const std::vector<Vec>&, double) { return Vec(x.array().square()); };
    CHECK_THROWS_AS(solve_dde(s, HistorySpec::constant(v1(10.0), 1.0), {0.01, 0.0, 5.0}), DivergenceError);
}
