#pragma once

#include "delayid/config.hpp"
#include "delayid/data.hpp"
#include "delayid/metrics.hpp"
#include "delayid/ndde.hpp"
#include "delayid/optimize.hpp"
#include "delayid/sindy.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

enum class Command { simulate, fit, train_ndde, compare };

std::string command_name(Command c);
std::optional<Command> parse_command(const std::string& s);

struct ModelSpec {
    std::string id = "logistic";
    NamedValues params;  // every parameter of the model, defaults filled in
};

/// logistic, mackey_glass, two_neuron, climate, rossler.
std::vector<std::string> model_ids();
/// Throws ParameterError for an unknown id.
NamedValues default_params(const std::string& id);
DdeSystem make_system(const ModelSpec& model);
/// Names of the delay parameters, in the order the system sorts its delays.
std::vector<std::string> delay_keys(const std::string& id);

struct HistoryConfig {
    std::string kind = "constant";  // constant | cosine
    std::vector<double> value{1.0};
    double span = 0.0;
};

HistorySpec make_history(const HistoryConfig& h, int dim);

struct DataConfig {
    double t_start = 0.0;
    double t_end = 30.0;
    std::optional<double> boundary;
    double train_fraction = 0.6;
    std::size_t m = 100;
    std::optional<std::size_t> m_train;
    std::vector<SamplingKind> samplings{SamplingKind::uniform};
    DerivMode derivs = DerivMode::exact_rhs;
    double history_span = 0.0;
    double solver_step = 1e-3;
    /// Extra trajectories start from the base constant history plus a uniform
    /// perturbation in [-perturbation, perturbation] per component; draws whose
    /// samples leave [-bound, bound] are rejected.
    std::size_t trajectories = 1;
    double perturbation = 0.0;
    double bound = std::numeric_limits<double>::infinity();
};

struct SindyConfig {
    std::vector<std::string> methods{"E"};  // E or P<M>
    std::vector<int> degrees{2};
    bool trig = false;
    bool hill = false;
    std::optional<double> hill_alpha;  // fixed exponent; searched when unset
    std::vector<RegressionMethod> regressions{RegressionMethod::stls};
    std::optional<double> lambda;
    bool known_delays = false;
};

struct SearchConfig {
    std::vector<std::string> optimizers{"PS"};  // BF, BO, PS
    std::map<std::string, std::pair<double, double>> bounds;
    std::vector<int> grid{1000};
    PsoConfig pso;
    BoConfig bo;
};

struct NddeRunConfig {
    std::string label;
    InputLayout layout = InputLayout::full;
    bool current_state = true;
    std::vector<int> channels;  // simplified layout: channels read at every delay
    int delays = 1;
    int hidden = 10;
    double tau_max = 2.0;
    double replay_step = 1e-3;
    TrainConfig train;
};

struct ExperimentConfig {
    std::string name;
    std::string description;
    Command command = Command::fit;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<std::string> tables;
    /// Wall-clock columns in table CSVs; off keeps outputs byte-identical across runs.
    bool report_timing = false;
    ModelSpec model;
    HistoryConfig history;
    DataConfig data;
    SindyConfig sindy;
    SearchConfig search;
    std::vector<NddeRunConfig> ndde;
};

/// Typed view of a config with full static checking. Problems go to diags;
/// the result is only meaningful when diags holds no errors.
ExperimentConfig read_experiment(const Config& cfg, std::vector<Diagnostic>& diags);
/// Loads and reads; throws ConfigError listing the errors when there are any.
ExperimentConfig load_experiment(const std::string& path, std::vector<Diagnostic>& warnings);

/// Train/test pairs; entry 0 starts from the configured history.
struct DataSet {
    std::vector<Trajectory> train;
    std::vector<Trajectory> test;
};

DataSet generate_data(const ExperimentConfig& cfg, SamplingKind sampling);

struct SindyRun {
    BenchmarkRow row;
    SindyFit fit;
    FitReport report;
    std::optional<OptResult> search;
    std::vector<SearchDim> dims;
    NamedValues recovered;
};

/// One E-SINDy / P-SINDy identification: optimizer (or known delays), fit,
/// replay on the test window. Wall time covers the search and the final fit.
SindyRun run_sindy(const ExperimentConfig& cfg, const Trajectory& train, const Trajectory& test,
                   const std::string& method, const std::string& optimizer, RegressionMethod regression,
                   int degree);

/// Parameter values readable from a fitted model (delays, Hill exponent and
/// the model's named coefficients).
NamedValues recovered_params(const ExperimentConfig& cfg, const SparseModel& model);
/// Truth for param_error: the model parameters plus derived coefficients.
NamedValues truth_params(const ModelSpec& model);

struct NddeRun {
    BenchmarkRow row;
    TrainRecord record;
    NddeReport report;
    NamedValues recovered;
};

NddeModel build_ndde(const ExperimentConfig& cfg, const NddeRunConfig& run);
NddeRun run_ndde(const ExperimentConfig& cfg, const NddeRunConfig& run, const DataSet& data);

/// Runs the pipeline and writes artifacts to out. Returns the rows per table layout.
std::map<std::string, std::vector<BenchmarkRow>> run_experiment(Command command, const ExperimentConfig& cfg,
                                                                const std::filesystem::path& out,
                                                                std::ostream& log);

/// Bundled configs found in dir (sorted by name) with their command and description.
std::string list_benchmarks(const std::filesystem::path& dir);

}  // namespace delayid
