#include "delayid/data.hpp"
#include "delayid/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace delayid;

namespace {

DenseSolution logistic_solution(double t_end = 30.0) {
    const auto sys = make_logistic({});
    return solve_dde(sys, HistorySpec::constant(Vec::Constant(1, 0.5), 2.0), {1e-3, 0.0, t_end});
}

// Samples of an affine signal with no dense source attached.
Trajectory affine_trajectory() {
    Trajectory tr;
    for (int i = 0; i <= 20; ++i) tr.times.push_back(0.1 * i * i / 4.0);  // non-uniform
    tr.states.resize(21, 2);
    for (int i = 0; i <= 20; ++i) {
        tr.states(i, 0) = 2.0 * tr.times[static_cast<std::size_t>(i)] - 1.0;
        tr.states(i, 1) = -0.5 * tr.times[static_cast<std::size_t>(i)] + 3.0;
    }
    tr.history_times = {-1.0, -0.4};
    tr.history_states.resize(2, 2);
    for (int i = 0; i < 2; ++i) {
        tr.history_states(i, 0) = 2.0 * tr.history_times[static_cast<std::size_t>(i)] - 1.0;
        tr.history_states(i, 1) = -0.5 * tr.history_times[static_cast<std::size_t>(i)] + 3.0;
    }
    return tr;
}

}  // namespace

TEST_CASE("sample lookups are exact on affine signals") {
    const auto tr = affine_trajectory();
    REQUIRE_NOTHROW(validate(tr));
    for (double t = -1.0; t <= tr.times.back(); t += 0.0371) {
        const Vec x = lookup_state(tr, t);
        CHECK(x[0] == doctest::Approx(2.0 * t - 1.0).epsilon(1e-12));
        CHECK(x[1] == doctest::Approx(-0.5 * t + 3.0).epsilon(1e-12));
    }
    const Mat d = delayed_states(tr, 0.3);
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        if (tr.times[static_cast<std::size_t>(i)] >= -0.7)
            CHECK(d(i, 0) == doctest::Approx(2.0 * (tr.times[static_cast<std::size_t>(i)] - 0.3) - 1.0));
    CHECK_THROWS_AS(lookup_state(tr, -1.5), DomainError);
}

TEST_CASE("central differences are exact on quadratics in the interior") {
    std::vector<double> t;
    Mat x(11, 1);
    for (int i = 0; i <= 10; ++i) {
        t.push_back(0.2 * i);
        x(i, 0) = 3.0 * t.back() * t.back() - t.back();
    }
    const Mat d = central_difference(t, x);
    for (int i = 1; i < 10; ++i) CHECK(d(i, 0) == doctest::Approx(6.0 * t[static_cast<std::size_t>(i)] - 1.0));
    CHECK(d(0, 0) == doctest::Approx((x(1, 0) - x(0, 0)) / 0.2));
}

TEST_CASE("rmse") {
    const Mat a = Mat::Zero(2, 2);
    Mat b = a;
    b(0, 0) = 2.0;
    CHECK(rmse(a, b) == doctest::Approx(1.0));
    CHECK_THROWS_AS(rmse(a, Mat::Zero(3, 2)), DimensionError);
}

TEST_CASE("train and test sets respect the boundary and sample counts") {
    const auto sol = logistic_solution();
    for (auto kind : {SamplingKind::uniform, SamplingKind::random}) {
        SplitSpec sp;
        sp.boundary = 18.0;
        sp.m = 20;
        sp.m_train = 10;
        sp.sampling = kind;
        sp.seed = 5;
        const auto [train, test] = sample_trajectory(sol, nullptr, sp, DerivMode::none);
        CHECK(train.size() == 10);
        CHECK(test.size() == 10);
        for (double t : train.times) CHECK(t <= 18.0);
        for (double t : test.times) CHECK(t > 18.0);
        CHECK(test.window_start == 18.0);
        for (std::size_t i = 1; i < train.size(); ++i) CHECK(train.times[i] > train.times[i - 1]);
    }
}

TEST_CASE("random sampling is reproducible from the seed") {
    const auto sol = logistic_solution();
    SplitSpec sp;
    sp.sampling = SamplingKind::random;
    sp.seed = 9;
    const auto a = sample_trajectory(sol, nullptr, sp, DerivMode::none);
    const auto b = sample_trajectory(sol, nullptr, sp, DerivMode::none);
    CHECK(a.first.times == b.first.times);
    sp.seed = 10;
    const auto c = sample_trajectory(sol, nullptr, sp, DerivMode::none);
    CHECK(a.first.times != c.first.times);
}

TEST_CASE("exact derivatives match the right-hand side") {
    const auto sys = make_logistic({});
    const auto sol = logistic_solution();
    SplitSpec sp;
    const auto [train, test] = sample_trajectory(sol, &sys, sp, DerivMode::exact_rhs);
    REQUIRE(train.derivs);
    for (std::size_t i = 0; i < train.size(); i += 7) {
        const double t = train.times[i];
        const double want = sys(t, sol.value(t), {sol.value(t - 1.0)})[0];
        CHECK((*train.derivs)(static_cast<Eigen::Index>(i), 0) == doctest::Approx(want));
    }
    CHECK_THROWS_AS(sample_trajectory(sol, nullptr, sp, DerivMode::exact_rhs), ParameterError);
}

TEST_CASE("central differences need uniform sampling") {
    const auto sol = logistic_solution();
    SplitSpec sp;
    sp.sampling = SamplingKind::random;
    CHECK_THROWS_AS(sample_trajectory(sol, nullptr, sp, DerivMode::central_difference), UnsupportedError);
}

TEST_CASE("history samples use the training spacing") {
    const auto sol = logistic_solution();
    SplitSpec sp;
    sp.m = 61;
    sp.m_train = 37;
    sp.boundary = 18.0;
    sp.history_span = 2.0;
    const auto [train, test] = sample_trajectory(sol, nullptr, sp, DerivMode::none);
    REQUIRE(train.history_times.size() == 4);
    CHECK(train.history_times.front() == doctest::Approx(-2.0));
    CHECK(train.history_times.back() == doctest::Approx(-0.5));
    // The test history is the training data plus its history.
    CHECK(test.history_times.size() == train.history_times.size() + train.size());
}

TEST_CASE("trajectory CSV round-trip") {
    const auto sys = make_logistic({});
    const auto sol = logistic_solution();
    SplitSpec sp;
    sp.history_span = 1.0;
    sp.seed = 4;
    const auto [train, test] = sample_trajectory(sol, &sys, sp, DerivMode::exact_rhs);
    std::stringstream ss;
    write_trajectory_csv(ss, train);
    const auto back = read_trajectory_csv(ss);
    CHECK(back.times == train.times);
    CHECK(back.states == train.states);
    REQUIRE(back.derivs);
    CHECK(*back.derivs == *train.derivs);
    CHECK(back.history_times == train.history_times);
    CHECK(back.seed == 4);
    CHECK(back.label == "train");
}

TEST_CASE("validate catches unsorted times") {
    Trajectory tr;
    tr.times = {0.0, 2.0, 1.0};
    tr.states = Mat::Zero(3, 1);
    tr.history_states.resize(0, 1);
    CHECK_THROWS(validate(tr));
}
