#include "delayid/models.hpp"

#include "delayid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace delayid {

namespace {

constexpr double kRangeSlack = 1e-12;

void require(bool ok, const char* msg) {
    if (!ok) throw ParameterError(msg);
}

}  // namespace

HistorySpec HistorySpec::constant(Vec value, double span) {
    require(span >= 0.0, "history span must be non-negative");
    require(value.size() > 0, "constant history needs a non-empty vector");
    HistorySpec h;
    h.kind_ = Kind::constant;
    h.span_ = span;
    h.dim_ = static_cast<int>(value.size());
    h.constant_ = std::move(value);
    return h;
}

HistorySpec HistorySpec::cosine(int dim, double span) {
    require(span >= 0.0, "history span must be non-negative");
    require(dim >= 1, "history dimension must be positive");
    HistorySpec h;
    h.kind_ = Kind::cosine;
    h.span_ = span;
    h.dim_ = dim;
    return h;
}

HistorySpec HistorySpec::sampled(std::vector<double> times, Mat values) {
    return sampled(std::move(times), std::move(values), Mat());
}

HistorySpec HistorySpec::sampled(std::vector<double> times, Mat values, Mat derivs) {
    require(times.size() >= 1, "sampled history needs at least one sample");
    require(static_cast<Eigen::Index>(times.size()) == values.rows(),
            "sampled history: times/values size mismatch");
    require(derivs.size() == 0 || (derivs.rows() == values.rows() && derivs.cols() == values.cols()),
            "sampled history: derivative shape mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "sampled history times must be strictly ascending");
    require(times.back() >= -1e-9 * std::max(1.0, std::abs(times.front())), "sampled history must reach s = 0");
    HistorySpec h;
    h.kind_ = Kind::sampled;
    h.span_ = std::max(0.0, -times.front());
    h.dim_ = static_cast<int>(values.cols());
    h.times_ = std::move(times);
    h.values_ = std::move(values);
    h.derivs_ = std::move(derivs);
    return h;
}

void HistorySpec::check_range(double s) const {
    const double slack = kRangeSlack * std::max(1.0, span_);
    if (s < -span_ - slack || s > slack) {
        std::ostringstream os;
        os << "history evaluated at s=" << s << " outside [" << -span_ << ", 0]";
        throw DomainError(os.str());
    }
}

Vec HistorySpec::value(double s) const {
    check_range(s);
    switch (kind_) {
        case Kind::constant:
            return constant_;
        case Kind::cosine:
            return Vec::Constant(dim_, std::cos(s));
        case Kind::sampled:
            break;
    }
    if (times_.size() == 1) return values_.row(0).transpose();
    s = std::clamp(s, times_.front(), times_.back());
    auto it = std::upper_bound(times_.begin(), times_.end(), s);
    std::size_t j = it == times_.end() ? times_.size() - 1 : static_cast<std::size_t>(it - times_.begin());
    if (j == 0) j = 1;
    const std::size_t i = j - 1;
    const double h = times_[j] - times_[i];
    const double th = (s - times_[i]) / h;
    if (!hermite()) return ((1.0 - th) * values_.row(i) + th * values_.row(j)).transpose();
    const double th2 = th * th, th3 = th2 * th;
    const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th;
    const double h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
    return (h00 * values_.row(i) + h10 * h * derivs_.row(i) + h01 * values_.row(j) + h11 * h * derivs_.row(j))
        .transpose();
}

Vec HistorySpec::derivative(double s) const {
    check_range(s);
    switch (kind_) {
        case Kind::constant:
            return Vec::Zero(dim_);
        case Kind::cosine:
            return Vec::Constant(dim_, -std::sin(s));
        case Kind::sampled:
            break;
    }
    if (times_.size() == 1) return Vec::Zero(dim_);
    s = std::clamp(s, times_.front(), times_.back());
    auto it = std::upper_bound(times_.begin(), times_.end(), s);
    std::size_t j = it == times_.end() ? times_.size() - 1 : static_cast<std::size_t>(it - times_.begin());
    if (j == 0) j = 1;
    const std::size_t i = j - 1;
    const double h = times_[j] - times_[i];
    if (!hermite()) return ((values_.row(j) - values_.row(i)) / h).transpose();
    const double th = (s - times_[i]) / h;
    const double th2 = th * th;
    const double d00 = (6 * th2 - 6 * th) / h, d10 = 3 * th2 - 4 * th + 1;
    const double d01 = (-6 * th2 + 6 * th) / h, d11 = 3 * th2 - 2 * th;
    return (d00 * values_.row(i) + d10 * derivs_.row(i) + d01 * values_.row(j) + d11 * derivs_.row(j))
        .transpose();
}

Vec eval_history(const HistorySpec& h, double s) { return h.value(s); }

Vec DdeSystem::operator()(double t, const Vec& x, const std::vector<Vec>& delayed) const {
    const double u = input ? input(t) : 0.0;
    return rhs(t, x, delayed, u);
}

void validate_system(const DdeSystem& sys) {
    require(sys.n >= 1, "system dimension must be positive");
    require(static_cast<bool>(sys.rhs), "system has no right-hand side");
    for (std::size_t i = 0; i < sys.delays.size(); ++i) {
        require(sys.delays[i] > 0.0, "delays must be strictly positive");
        if (i > 0) require(sys.delays[i] > sys.delays[i - 1], "delays must be sorted and distinct");
    }
}

DdeSystem make_logistic(const LogisticParams& p) {
    require(p.r > 0.0, "logistic: r must be positive");
    require(p.K > 0.0, "logistic: K must be positive");
    require(p.tau > 0.0, "logistic: tau must be positive");
    DdeSystem sys;
    sys.n = 1;
    sys.delays = {p.tau};
    sys.label = "logistic";
    sys.rhs = [r = p.r, K = p.K](double, const Vec& x, const std::vector<Vec>& d, double) {
        Vec out(1);
        out[0] = r * x[0] * (1.0 - d[0][0] / K);
        return out;
    };
    return sys;
}

DdeSystem make_mackey_glass(const MackeyGlassParams& p) {
    require(p.alpha > 0.0, "mackey_glass: Hill exponent alpha must be positive");
    require(p.beta > 0.0, "mackey_glass: beta must be positive");
    require(p.gamma > 0.0, "mackey_glass: gamma must be positive");
    require(p.tau > 0.0, "mackey_glass: tau must be positive");
    DdeSystem sys;
    sys.n = 1;
    sys.delays = {p.tau};
    sys.label = "mackey_glass";
    sys.rhs = [b = p.beta, g = p.gamma, a = p.alpha](double, const Vec& x, const std::vector<Vec>& d, double) {
        const double xd = d[0][0];
        Vec out(1);
        out[0] = b * xd / (1.0 + std::pow(xd, a)) - g * x[0];
        return out;
    };
    return sys;
}

DdeSystem make_two_neuron(const TwoNeuronParams& p) {
    require(p.tau_s > 0.0 && p.tau1 > 0.0 && p.tau2 > 0.0, "two_neuron: delays must be positive");
    require(p.kappa > 0.0, "two_neuron: kappa must be positive");
    std::vector<double> delays = {p.tau_s, p.tau1, p.tau2};
    std::sort(delays.begin(), delays.end());
    delays.erase(std::unique(delays.begin(), delays.end()), delays.end());
    auto index_of = [&](double tau) {
        return static_cast<std::size_t>(std::find(delays.begin(), delays.end(), tau) - delays.begin());
    };
    const std::size_t is = index_of(p.tau_s), i1 = index_of(p.tau1), i2 = index_of(p.tau2);
    DdeSystem sys;
    sys.n = 2;
    sys.delays = delays;
    sys.label = "two_neuron";
    sys.rhs = [p, is, i1, i2](double, const Vec& x, const std::vector<Vec>& d, double) {
        Vec out(2);
        out[0] = -p.kappa * x[0] + p.beta * std::tanh(d[is][0]) + p.a12 * std::tanh(d[i2][1]);
        out[1] = -p.kappa * x[1] + p.beta * std::tanh(d[is][1]) + p.a21 * std::tanh(d[i1][0]);
        return out;
    };
    return sys;
}

double climate_saturation(double kappa, double d_u, double d_l, double x) {
    return x >= 0.0 ? d_u * std::tanh(kappa * x / d_u) : d_l * std::tanh(kappa * x / d_l);
}

DdeSystem make_climate(const ClimateParams& p) {
    require(p.tau1 > 0.0 && p.tau2 > 0.0, "climate: delays must be positive");
    require(p.tau1 != p.tau2, "climate: delays must differ");
    require(p.kappa > 0.0, "climate: kappa must be positive");
    require(p.d_u != 0.0 && p.d_l != 0.0, "climate: saturation levels must be non-zero");
    DdeSystem sys;
    sys.n = 1;
    const bool swapped = p.tau1 > p.tau2;
    sys.delays = swapped ? std::vector<double>{p.tau2, p.tau1} : std::vector<double>{p.tau1, p.tau2};
    sys.label = "climate";
    sys.input = [](double t) { return std::cos(2.0 * std::numbers::pi * t); };
    sys.rhs = [p, swapped](double, const Vec&, const std::vector<Vec>& d, double u) {
        const double x1 = d[swapped ? 1 : 0][0];
        const double x2 = d[swapped ? 0 : 1][0];
        Vec out(1);
        out[0] = p.a * climate_saturation(p.kappa, p.d_u, p.d_l, x1) -
                 p.b * climate_saturation(p.kappa, p.d_u, p.d_l, x2) + p.c * u;
        return out;
    };
    return sys;
}

DdeSystem make_rossler(const RosslerParams& p) {
    require(p.tau1 > 0.0 && p.tau2 > 0.0, "rossler: delays must be positive");
    require(p.tau1 != p.tau2, "rossler: delays must differ");
    DdeSystem sys;
    sys.n = 3;
    const bool swapped = p.tau1 > p.tau2;
    sys.delays = swapped ? std::vector<double>{p.tau2, p.tau1} : std::vector<double>{p.tau1, p.tau2};
    sys.label = "rossler";
    sys.rhs = [p, swapped](double, const Vec& x, const std::vector<Vec>& d, double) {
        const double x1d1 = d[swapped ? 1 : 0][0];
        const double x1d2 = d[swapped ? 0 : 1][0];
        Vec out(3);
        out[0] = -x[1] - x[2] + p.alpha1 * x1d1 + p.alpha2 * x1d2;
        out[1] = x[0] + p.beta1 * x[1];
        out[2] = p.beta2 + x[2] * x[0] - p.gamma * x[2];
        return out;
    };
    return sys;
}

}  // namespace delayid
