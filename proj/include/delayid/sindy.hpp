#pragma once

#include "delayid/collocation.hpp"
#include "delayid/data.hpp"
#include "delayid/library.hpp"
#include "delayid/regression.hpp"
#include "delayid/solver.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

enum class SindyKind { e_sindy, p_sindy };

/// Regressed model plus everything needed to execute it.
struct SparseModel {
    SindyKind kind = SindyKind::e_sindy;
    std::vector<double> delays;              // e_sindy: one per delayed block
    std::optional<CollocationScheme> scheme;  // p_sindy
    LibrarySpec spec;
    SparseCoefficients xi;
    std::vector<std::string> labels;

    int dim() const { return spec.n; }
    /// Largest lag the model reads (max delay or tau_bar).
    double reach() const;
};

struct SindyFit {
    SparseModel model;
    double epsilon = 0.0;  // training RMSE of X' against Theta * Xi
};

SindyFit esindy_fit(const Trajectory& train, const std::vector<double>& delays, const LibrarySpec& spec,
                    const RegressionConfig& reg);
SindyFit psindy_fit(const Trajectory& train, double tau_bar, int M, const LibrarySpec& spec,
                    const RegressionConfig& reg);

/// Library matrix of a model evaluated on a trajectory (delayed or collocated blocks).
Mat model_library(const SparseModel& model, const Trajectory& traj);
/// Model derivative predictions at the trajectory samples.
Mat predict_derivatives(const SparseModel& model, const Trajectory& traj);

/// The model as a DDE system (e_sindy).
DdeSystem as_dde(const SparseModel& model);

struct ReplayConfig {
    double step = 1e-3;
};

DenseSolution simulate_esindy(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                              const ReplayConfig& cfg = {});
/// Integrates the collocated ODE and returns block 0 with `history` attached.
DenseSolution simulate_psindy(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                              const ReplayConfig& cfg = {});
DenseSolution simulate(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                       const ReplayConfig& cfg = {});

/// History preceding the test window and the time the replay starts from.
/// Reads the attached dense source when there is one and use_dense is set,
/// otherwise interpolates the recorded samples linearly.
std::pair<HistorySpec, double> replay_history(const Trajectory& test, double span, bool use_dense = true);

struct FitReport {
    double rmse_deriv_train = 0.0;
    double rmse_deriv_test = 0.0;
    double rmse_traj_test = 0.0;
    std::map<std::string, double> recovered;
    std::size_t sindy_calls = 0;
    double wall_time = 0.0;
    std::vector<std::string> flags;
};

/// Fills the error metrics; divergent replays report rmse_traj_test = +inf.
FitReport evaluate(const SparseModel& model, const Trajectory& train, const Trajectory& test,
                   const ReplayConfig& cfg = {});

/// Maps an optimizer point to a fit. For e_sindy the point holds one value per
/// delay, for p_sindy it holds tau_bar; a trailing Hill exponent follows when
/// the library has a Hill term.
struct SindyProblem {
    SindyKind kind = SindyKind::e_sindy;
    int delay_count = 1;
    int M = 10;
    LibrarySpec spec;
    RegressionConfig reg;
    const Trajectory* train = nullptr;

    std::size_t dimension() const;
    SindyFit fit(const Vec& point) const;
    /// epsilon at point, +inf when the fit is impossible (lookups out of range, non-finite).
    double objective(const Vec& point) const;
};

}  // namespace delayid
