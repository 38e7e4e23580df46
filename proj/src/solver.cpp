#include "delayid/solver.hpp"

#include "delayid/errors.hpp"

#include <cmath>
#include <sstream>

namespace delayid {

DenseSolution::DenseSolution(double t0, double step, int dim, std::optional<HistorySpec> history)
    : t0_(t0), step_(step), dim_(dim), history_(std::move(history)) {
    if (!(step > 0.0)) throw ParameterError("dense solution step must be positive");
    if (dim < 1) throw ParameterError("dense solution dimension must be positive");
    if (history_ && history_->dim() != dim) throw DimensionError("history dimension does not match solution");
}

Vec DenseSolution::state(std::size_t i) const {
    return Eigen::Map<const Vec>(x_.data() + i * static_cast<std::size_t>(dim_), dim_);
}

Vec DenseSolution::deriv(std::size_t i) const {
    return Eigen::Map<const Vec>(dx_.data() + i * static_cast<std::size_t>(dim_), dim_);
}

void DenseSolution::append(const Vec& x, const Vec& dx) {
    x_.insert(x_.end(), x.data(), x.data() + dim_);
    dx_.insert(dx_.end(), dx.data(), dx.data() + dim_);
}

void DenseSolution::set_derivative(std::size_t i, const Vec& dx) {
    std::copy(dx.data(), dx.data() + dim_, dx_.begin() + static_cast<std::ptrdiff_t>(i) * dim_);
}

void DenseSolution::check_range(double t) const {
    const double slack = 1e-9 * step_;
    if (points() == 0 || t > t_end() + slack || t < t_min() - slack) {
        std::ostringstream os;
        os << "solution evaluated at t=" << t << " outside [" << t_min() << ", "
           << (points() ? t_end() : t0_) << "]";
        throw DomainError(os.str());
    }
}

// Returns the left grid index of the segment holding t; theta in [0, 1].
std::size_t DenseSolution::segment(double t, double& theta) const {
    const std::size_t last = points() - 1;
    const double u = (t - t0_) / step_;
    double fl = std::floor(u);
    if (fl < 0.0) fl = 0.0;
    std::size_t i = static_cast<std::size_t>(fl);
    if (i >= last) i = last == 0 ? 0 : last - 1;
    theta = last == 0 ? 0.0 : u - static_cast<double>(i);
    return i;
}

Vec DenseSolution::value(double t) const {
    check_range(t);
    if (t < t0_) return history_->value(std::min(0.0, t - t0_));
    const std::size_t np = points();
    const double u = (t - t0_) / step_;
    const double nearest = std::round(u);
    if (std::abs(u - nearest) <= 1e-12 * std::max(1.0, nearest) && nearest < static_cast<double>(np))
        return state(static_cast<std::size_t>(nearest));
    double th = 0.0;
    const std::size_t i = segment(t, th);
    if (np == 1) return state(0);
    const double h = step_;
    const double th2 = th * th, th3 = th2 * th;
    const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th;
    const double h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
    const std::size_t a = i * static_cast<std::size_t>(dim_), b = a + static_cast<std::size_t>(dim_);
    Vec out(dim_);
    for (int c = 0; c < dim_; ++c)
        out[c] = h00 * x_[a + c] + h10 * h * dx_[a + c] + h01 * x_[b + c] + h11 * h * dx_[b + c];
    return out;
}

Vec DenseSolution::derivative(double t) const {
    check_range(t);
    if (t < t0_) return history_->derivative(std::min(0.0, t - t0_));
    const std::size_t np = points();
    const double u = (t - t0_) / step_;
    const double nearest = std::round(u);
    if (std::abs(u - nearest) <= 1e-12 * std::max(1.0, nearest) && nearest < static_cast<double>(np))
        return deriv(static_cast<std::size_t>(nearest));
    double th = 0.0;
    const std::size_t i = segment(t, th);
    if (np == 1) return deriv(0);
    const double h = step_;
    const double th2 = th * th;
    const double d00 = (6 * th2 - 6 * th) / h, d10 = 3 * th2 - 4 * th + 1;
    const double d01 = (-6 * th2 + 6 * th) / h, d11 = 3 * th2 - 2 * th;
    const std::size_t a = i * static_cast<std::size_t>(dim_), b = a + static_cast<std::size_t>(dim_);
    Vec out(dim_);
    for (int c = 0; c < dim_; ++c)
        out[c] = d00 * x_[a + c] + d10 * dx_[a + c] + d01 * x_[b + c] + d11 * dx_[b + c];
    return out;
}

DenseSolution DenseSolution::block(int first, int count, std::optional<HistorySpec> history) const {
    if (first < 0 || count < 1 || first + count > dim_) throw DimensionError("block outside solution dimension");
    DenseSolution out(t0_, step_, count, std::move(history));
    for (std::size_t i = 0; i < points(); ++i)
        out.append(state(i).segment(first, count), deriv(i).segment(first, count));
    return out;
}

HistorySpec DenseSolution::history_before(double t_to, double span) const {
    if (span <= 0.0) return HistorySpec::constant(value(t_to), 0.0);
    const double t_from = t_to - span;
    check_range(t_from);
    check_range(t_to);
    std::vector<double> times;
    std::vector<Vec> xs, dxs;
    auto push = [&](double t) {
        times.push_back(t - t_to);
        xs.push_back(value(t));
        dxs.push_back(derivative(t));
    };
    // Pre-t0 part comes from the attached history on a fine grid of the same step.
    double t = t_from;
    push(t);
    while (true) {
        double next;
        if (t < t0_) {
            next = std::min(t0_, t + step_);
        } else {
            const double k = std::floor((t - t0_) / step_ + 1e-9) + 1.0;
            next = t0_ + k * step_;
        }
        if (next >= t_to - 1e-12 * step_) break;
        if (next > t + 1e-12 * step_) push(next);
        t = next;
    }
    push(t_to);
    Mat X(static_cast<Eigen::Index>(xs.size()), dim_), D(static_cast<Eigen::Index>(xs.size()), dim_);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
        D.row(static_cast<Eigen::Index>(i)) = dxs[i].transpose();
    }
    return HistorySpec::sampled(std::move(times), std::move(X), std::move(D));
}

namespace {

std::size_t step_count(double span, double step) {
    if (!(span > 0.0)) throw ParameterError("integration window must have positive length");
    if (!(step > 0.0)) throw ParameterError("step must be positive");
    return static_cast<std::size_t>(std::max(1.0, std::ceil(span / step - 1e-9)));
}

void check_finite(const Vec& x, double t) {
    if (!x.allFinite()) {
        std::ostringstream os;
        os << "integration diverged at t=" << t;
        throw DivergenceError(os.str(), t);
    }
}

}  // namespace

DenseSolution solve_dde(const DdeSystem& sys, const HistorySpec& history, const SolveConfig& cfg) {
    validate_system(sys);
    if (history.dim() != sys.n) throw DimensionError("history dimension does not match system");
    if (history.span() < sys.max_delay() * (1.0 - 1e-12))
        throw DomainError("history span shorter than the maximum delay");
    const double span = cfg.t_end - cfg.t0;
    std::size_t steps = step_count(span, cfg.step);
    if (!sys.delays.empty()) {
        const double cap = sys.min_delay() / 10.0;
        steps = std::max(steps, step_count(span, cap));
    }
    const double h = span / static_cast<double>(steps);
    DenseSolution sol(cfg.t0, h, sys.n, history);

    const std::size_t k = sys.delays.size();
    std::vector<Vec> delayed(k);
    auto f = [&](double t, const Vec& x) {
        for (std::size_t j = 0; j < k; ++j) delayed[j] = sol.value(t - sys.delays[j]);
        return sys(t, x, delayed);
    };

    Vec x = history.value(0.0);
    check_finite(x, cfg.t0);
    // The derivative at a grid point is only known once the point exists, so
    // append with a placeholder and patch it before the next lookup can need it.
    sol.append(x, Vec::Zero(sys.n));
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = sol.time(i);
        const Vec k1 = f(t, x);
        check_finite(k1, t);
        sol.set_derivative(i, k1);
        const Vec k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
        const Vec k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
        const Vec k4 = f(t + h, x + h * k3);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_finite(x, t + h);
        sol.append(x, Vec::Zero(sys.n));
    }
    const Vec last = f(sol.time(steps), x);
    check_finite(last, sol.time(steps));
    sol.set_derivative(steps, last);
    return sol;
}

DenseSolution solve_ode(const OdeRhs& rhs, const Vec& x0, const SolveConfig& cfg) {
    check_finite(x0, cfg.t0);
    const double span = cfg.t_end - cfg.t0;
    const std::size_t steps = step_count(span, cfg.step);
    const double h = span / static_cast<double>(steps);
    DenseSolution sol(cfg.t0, h, static_cast<int>(x0.size()));
    Vec x = x0;
    Vec k1 = rhs(cfg.t0, x);
    check_finite(k1, cfg.t0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = sol.time(i);
        sol.append(x, k1);
        const Vec k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
        const Vec k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
        const Vec k4 = rhs(t + h, x + h * k3);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_finite(x, t + h);
        k1 = rhs(t + h, x);
        check_finite(k1, t + h);
    }
    sol.append(x, k1);
    return sol;
}

Vec eval_solution(const DenseSolution& sol, double t) { return sol.value(t); }
Vec eval_derivative(const DenseSolution& sol, double t) { return sol.derivative(t); }

}  // namespace delayid
