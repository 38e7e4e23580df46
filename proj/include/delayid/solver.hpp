#pragma once

#include "delayid/models.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace delayid {

/// Piecewise cubic Hermite trajectory on a uniform grid t0, t0 + h, ..., t_end,
/// with an optional history used for t < t0.
class DenseSolution {
public:
    DenseSolution(double t0, double step, int dim, std::optional<HistorySpec> history = std::nullopt);

    double t0() const { return t0_; }
    double t_end() const { return t0_ + step_ * static_cast<double>(points() - 1); }
    double step() const { return step_; }
    int dim() const { return dim_; }
    std::size_t points() const { return x_.size() / static_cast<std::size_t>(dim_); }
    const std::optional<HistorySpec>& history() const { return history_; }
    /// Earliest time at which the solution can be evaluated.
    double t_min() const { return history_ ? t0_ - history_->span() : t0_; }

    double time(std::size_t i) const { return t0_ + step_ * static_cast<double>(i); }
    Vec state(std::size_t i) const;
    Vec deriv(std::size_t i) const;

    Vec value(double t) const;
    Vec derivative(double t) const;

    /// Components [first, first + count) as a standalone solution.
    DenseSolution block(int first, int count, std::optional<HistorySpec> history = std::nullopt) const;

    /// Grid samples on [t_from, t_to] (inclusive, to within rounding) as a
    /// Hermite history ending at s = 0 for t_to.
    HistorySpec history_before(double t_to, double span) const;

    void append(const Vec& x, const Vec& dx);
    void set_derivative(std::size_t i, const Vec& dx);

private:
    std::size_t segment(double t, double& theta) const;
    void check_range(double t) const;

    double t0_;
    double step_;
    int dim_;
    std::optional<HistorySpec> history_;
    std::vector<double> x_;
    std::vector<double> dx_;
};

struct SolveConfig {
    double step = 1e-3;
    double t0 = 0.0;
    double t_end = 1.0;
};

/// Method of steps with classical RK4. Delayed states come from the dense
/// output completed so far (or the history for t - tau < t0); the step is
/// reduced to at most min(delays) / 10 so a stage never reads the step in
/// progress.
DenseSolution solve_dde(const DdeSystem& sys, const HistorySpec& history, const SolveConfig& cfg);

using OdeRhs = std::function<Vec(double, const Vec&)>;

DenseSolution solve_ode(const OdeRhs& rhs, const Vec& x0, const SolveConfig& cfg);

Vec eval_solution(const DenseSolution& sol, double t);
Vec eval_derivative(const DenseSolution& sol, double t);

}  // namespace delayid
