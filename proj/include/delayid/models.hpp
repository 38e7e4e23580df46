#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace delayid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Initial history phi on [-span, 0].
///
/// Sampled histories interpolate linearly between samples, or with cubic
/// Hermite polynomials when derivative samples are supplied (used when the
/// history is cut out of a dense solver output, so replays see exactly the
/// same function the generator produced).
class HistorySpec {
public:
    enum class Kind { constant, cosine, sampled };

    static HistorySpec constant(Vec value, double span);
    static HistorySpec cosine(int dim, double span);
    /// times are relative (s <= 0), strictly ascending, and must cover [-span, 0].
    static HistorySpec sampled(std::vector<double> times, Mat values);
    static HistorySpec sampled(std::vector<double> times, Mat values, Mat derivs);

    Kind kind() const { return kind_; }
    double span() const { return span_; }
    int dim() const { return dim_; }
    bool hermite() const { return derivs_.size() > 0; }

    Vec value(double s) const;
    Vec derivative(double s) const;

private:
    HistorySpec() = default;
    void check_range(double s) const;

    Kind kind_ = Kind::constant;
    double span_ = 0.0;
    int dim_ = 0;
    Vec constant_;
    std::vector<double> times_;
    Mat values_;  // rows = samples
    Mat derivs_;
};

Vec eval_history(const HistorySpec& h, double s);

/// Right-hand side f(t, x(t), [x(t - tau_1), ..., x(t - tau_k)], u(t)).
using DdeRhs = std::function<Vec(double, const Vec&, const std::vector<Vec>&, double)>;

/// A DDE with k constant discrete delays, 0 < tau_1 < ... < tau_k.
struct DdeSystem {
    int n = 0;
    std::vector<double> delays;
    DdeRhs rhs;
    std::function<double(double)> input;  // empty when autonomous
    std::string label;

    double max_delay() const { return delays.empty() ? 0.0 : delays.back(); }
    double min_delay() const { return delays.empty() ? 0.0 : delays.front(); }

    /// Evaluates rhs with the exogenous input (if any) sampled at t.
    Vec operator()(double t, const Vec& x, const std::vector<Vec>& delayed) const;
};

/// Checks the structural invariants (sorted positive delays, n >= 1, rhs set).
void validate_system(const DdeSystem& sys);

struct LogisticParams {
    double r = 1.8, K = 10.0, tau = 1.0;
};

struct MackeyGlassParams {
    double beta = 4.0, gamma = 2.0, alpha = 9.6, tau = 1.0;
};

struct TwoNeuronParams {
    double kappa = 0.5, beta = -1.0, a12 = 1.0, a21 = 2.0;
    double tau_s = 1.5, tau1 = 2.0, tau2 = 2.0;
};

struct ClimateParams {
    double a = 2.02, b = 3.03, c = 2.6377, kappa = 11.0;
    double d_u = 2.0, d_l = -0.4;
    double tau1 = 0.0958, tau2 = 0.4792;
};

struct RosslerParams {
    double alpha1 = 0.2, alpha2 = 1.0, beta1 = 0.2, beta2 = 0.2, gamma = 1.2;
    double tau1 = 1.0, tau2 = 2.0;
};

DdeSystem make_logistic(const LogisticParams& p);
DdeSystem make_mackey_glass(const MackeyGlassParams& p);
DdeSystem make_two_neuron(const TwoNeuronParams& p);
DdeSystem make_climate(const ClimateParams& p);
DdeSystem make_rossler(const RosslerParams& p);

/// Asymmetric saturation of the climate model: d_u tanh(kappa x / d_u) for
/// x >= 0 and d_l tanh(kappa x / d_l) otherwise.
double climate_saturation(double kappa, double d_u, double d_l, double x);

}  // namespace delayid
