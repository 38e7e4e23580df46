#pragma once

#include "delayid/models.hpp"
#include "delayid/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace delayid {

/// Sampled time series X (rows = sample instants) plus what is needed to look
/// up states between and before the samples.
///
/// Lookups (delayed and collocated samples) linearly interpolate the
/// concatenation of history_times/history_states and the samples. When a dense
/// source is attached (simulated data whose generator output was recorded in
/// full), lookups read that source instead.
struct Trajectory {
    std::vector<double> times;
    Mat states;                  // m x n
    std::optional<Mat> derivs;   // m x n
    std::optional<Vec> input;    // m
    std::vector<double> history_times;  // ascending, all < times.front()
    Mat history_states;
    std::shared_ptr<const DenseSolution> dense;
    std::string label;
    std::uint64_t seed = 0;
    /// Start of the window this trajectory covers (train/test boundary for test sets).
    double window_start = std::numeric_limits<double>::quiet_NaN();

    int dim() const { return static_cast<int>(states.cols()); }
    std::size_t size() const { return times.size(); }
    /// Earliest time a lookup can reach.
    double lookup_start() const;
    double lookup_end() const;
};

/// Checks ordering, finiteness and shape invariants; throws on violation.
void validate(const Trajectory& traj);

/// State at time t via the trajectory's lookup rule.
Vec lookup_state(const Trajectory& traj, double t);

enum class DerivMode { exact_rhs, central_difference, none };
enum class SamplingKind { uniform, random };

struct SplitSpec {
    double t_start = 0.0;
    double t_end = 30.0;
    /// Explicit train/test boundary; defaults to t_start + train_fraction * span.
    std::optional<double> boundary;
    double train_fraction = 0.6;
    SamplingKind sampling = SamplingKind::uniform;
    std::size_t m = 100;
    /// When set, m_train samples are drawn in [t_start, boundary] and the rest
    /// of m in (boundary, t_end]; otherwise m samples cover the whole window.
    std::optional<std::size_t> m_train;
    std::uint64_t seed = 0;
    /// Length of pre-window history recorded for sample-based lookups.
    double history_span = 0.0;
    /// Attach the dense generator output for lookups.
    bool dense_lookup = true;

    double split_time() const;
};

/// Samples a generated solution into train/test sets. exact_rhs evaluates the
/// generating system at the sample instants, so it needs sys.
std::pair<Trajectory, Trajectory> sample_trajectory(const DenseSolution& sol, const DdeSystem* sys,
                                                    const SplitSpec& spec, DerivMode mode);

/// X_tau: row i holds x(t_i - tau).
Mat delayed_states(const Trajectory& traj, double tau);

/// Central differences on a uniform grid, one-sided (first order) at the ends.
Mat central_difference(const std::vector<double>& times, const Mat& states);

double rmse(const Mat& a, const Mat& b);

/// CSV: header t,x1..xn[,dx1..dxn][,u]; history rows first with t < t0.
/// Comment lines starting with '#' carry key=value metadata (t0, label, seed).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);

}  // namespace delayid
