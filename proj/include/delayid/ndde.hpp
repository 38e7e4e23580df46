#pragma once

#include "delayid/data.hpp"
#include "delayid/sindy.hpp"
#include "delayid/solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

enum class InputLayout { full, simplified };

/// One delayed read of the state: the channels of x(t - tau) fed to the network.
struct DelaySlot {
    double tau = 0.0;
    bool trainable = true;
    std::vector<int> channels;
};

/// x' = W3 tanh(W2 tanh(W1 z0 + b1) + b2), where z0 stacks the slot reads in
/// slot order followed by u(t) when the model is forced.
struct NddeModel {
    int n = 1;
    std::vector<DelaySlot> slots;
    InputLayout layout = InputLayout::full;
    bool has_exogenous = false;
    double tau_max = 2.0;
    Mat W1, W2, W3;
    Vec b1, b2;

    int input_width() const;
    int hidden1() const { return static_cast<int>(W1.rows()); }
    int hidden2() const { return static_cast<int>(W2.rows()); }
    std::vector<double> delays() const;
    /// Number of weight and bias entries.
    std::size_t weight_count() const;
};

/// Zero-initialised model; slots with tau = 0 and trainable = false read the current state.
NddeModel make_ndde(int n, std::vector<DelaySlot> slots, int l1, int l2, bool exogenous, double tau_max,
                    InputLayout layout = InputLayout::full);
/// [x(t), x(t - tau_1), ..., x(t - tau_k)] with every channel at every slot.
NddeModel make_ndde_full(int n, const std::vector<double>& delays, int l1, int l2, double tau_max,
                         bool exogenous = false);

/// Shape and range checks; throws DimensionError / ParameterError.
void validate(const NddeModel& model);

struct ForwardCache {
    Vec z0, z1, z2, out;
};

/// Network output for an assembled input vector.
ForwardCache forward(const NddeModel& model, const Vec& z0);

/// Samples on a uniform grid t0 + i dt. Rows before `first` are history
/// (no derivative or input needed); training draws from rows >= first.
struct NddeSeries {
    double t0 = 0.0;
    double dt = 0.0;
    Mat states;
    std::optional<Mat> derivs;  // same rows as states; history rows unused
    std::optional<Vec> input;
    std::size_t first = 0;

    std::size_t size() const { return static_cast<std::size_t>(states.rows()); }
    double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

/// Concatenates history and samples of a uniformly sampled trajectory.
/// Throws UnsupportedError when the grid is not uniform.
NddeSeries make_series(const Trajectory& traj);

/// Interpolated read of x(t_row - tau): (1 - a) x[row - i] + a x[row - i - 1] with tau = (i + a) dt.
struct DelayRead {
    std::size_t lo = 0;  // row - i
    double alpha = 0.0;
};
DelayRead delay_read(const NddeSeries& series, std::size_t row, double tau);

/// Network input at sample row, all reads taken from the data.
Vec assemble_input(const NddeModel& model, const NddeSeries& series, std::size_t row);
/// Network input at time t (t on the sample grid to within rounding).
Vec assemble_input(const NddeModel& model, const Trajectory& traj, double t);

/// Same layout as the model parameters.
struct NddeGradient {
    Mat W1, W2, W3;
    Vec b1, b2;
    Vec tau;

    static NddeGradient zeros_like(const NddeModel& model);
    NddeGradient& operator+=(const NddeGradient& other);
};

struct LossResult {
    double loss = 0.0;
    NddeGradient grad;
};

/// A batch member: series index and sample row.
struct BatchItem {
    std::size_t series = 0;
    std::size_t row = 0;
};

/// L = (1/(nN)) sum w_m |net(z_m) - x'_m|^2 with w_m = 1/t_m (or 1 when
/// inverse_time_weights is off). Samples with t_m <= 0 are skipped.
LossResult derivative_loss(const NddeModel& model, const std::vector<NddeSeries>& data,
                           const std::vector<BatchItem>& batch, bool inverse_time_weights = true);
/// L = (1/(nHN)) sum of |x_hat - x|^2 over the H samples after each batch
/// start. x_hat comes from explicit Euler with `substeps` steps per sample
/// interval; delayed reads mix data (up to the start) with simulated states.
/// Gradients come from reverse mode through the whole unrolled computation.
LossResult simulation_loss(const NddeModel& model, const std::vector<NddeSeries>& data,
                           const std::vector<BatchItem>& batch, int H, int substeps = 1);

/// Rows usable as batch members for the given loss (range of every delayed
/// read up to tau_max, t > 0 for the derivative loss, H steps of data after).
std::vector<BatchItem> eligible_rows(const NddeModel& model, const std::vector<NddeSeries>& data, bool derivative,
                                     int H);

enum class LossKind { derivative, simulation };

struct TrainConfig {
    LossKind loss = LossKind::derivative;
    int horizon = 10;
    /// Euler steps per sample interval in the simulation loss.
    int substeps = 1;
    /// w_m = 1/t_m in the derivative loss.
    bool inverse_time_weights = true;
    std::size_t batch = 32;
    std::size_t iters = 1000;
    double eta = 1e-2;
    double eta_tau = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::uint64_t seed = 0;
    /// Explicit initial delays for the trainable slots; uniform in [0, tau_max] otherwise.
    std::optional<std::vector<double>> delay_init;
    /// Keep the model's current weights instead of Glorot initialisation.
    bool keep_weights = false;
};

void validate(const TrainConfig& cfg);

struct AdamState {
    Vec m, v;
    std::size_t step = 0;
};

/// One ADAM update of weights (rate eta) and trainable delays (rate eta_tau),
/// then delays are clamped to [0, tau_max].
void adam_step(NddeModel& model, const NddeGradient& grad, AdamState& state, const TrainConfig& cfg);

/// Glorot-uniform weights, zero biases.
void glorot_init(NddeModel& model, std::uint64_t seed);

struct TrainRecord {
    std::vector<double> loss;
    std::vector<std::vector<double>> delays;  // trainable delays used for loss[q]
    std::size_t best_iter = 0;
    NddeModel best;
    double wall_time = 0.0;
};

/// Training loop: batch sampling, loss and gradient, ADAM step, delay clamp,
/// best snapshot. loss[q] is measured at the parameters held before update q,
/// and `best` is the parameter set with the smallest recorded loss.
TrainRecord train(NddeModel model, const std::vector<NddeSeries>& data, const TrainConfig& cfg);

/// The model as a DDE system. Delays below `min_delay` read the current state.
DdeSystem as_dde(const NddeModel& model, std::function<double(double)> input = {}, double min_delay = 1e-3);

DenseSolution simulate_ndde(const NddeModel& model, const HistorySpec& history, double t0, double t_end,
                            std::function<double(double)> input = {}, const ReplayConfig& cfg = {});

/// Linear interpolation of recorded input samples, clamped at both ends.
std::function<double(double)> input_interpolant(std::vector<double> times, std::vector<double> values);

struct NddeReport {
    double rmse_deriv_test = 0.0;  // direct prediction on the test samples
    double rmse_traj_test = 0.0;   // replay from the train/test boundary
    std::vector<std::string> flags;
};

/// Replays the model over the test window using the sampled data before it as
/// history (linear interpolation) and the recorded input of both sets.
NddeReport evaluate_ndde(const NddeModel& model, const Trajectory& train, const Trajectory& test,
                         const ReplayConfig& cfg = {});

/// Versioned text checkpoint.
void write_checkpoint(std::ostream& os, const NddeModel& model);
NddeModel read_checkpoint(std::istream& is);

/// Header iter,loss,tau_0..tau_k.
void write_train_record_csv(std::ostream& os, const TrainRecord& rec);

}  // namespace delayid
