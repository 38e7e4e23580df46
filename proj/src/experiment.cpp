#include "delayid/experiment.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace delayid {

std::string command_name(Command c) {
    switch (c) {
        case Command::simulate: return "simulate";
        case Command::fit: return "fit";
        case Command::train_ndde: return "train-ndde";
        case Command::compare: return "compare";
    }
    return {};
}

std::optional<Command> parse_command(const std::string& s) {
    for (Command c : {Command::simulate, Command::fit, Command::train_ndde, Command::compare})
        if (command_name(c) == s) return c;
    return std::nullopt;
}

// ---------------------------------------------------------------- models

std::vector<std::string> model_ids() { return {"logistic", "mackey_glass", "two_neuron", "climate", "rossler"}; }

NamedValues default_params(const std::string& id) {
    if (id == "logistic") {
        LogisticParams p;
        return {{"r", p.r}, {"K", p.K}, {"tau", p.tau}};
    }
    if (id == "mackey_glass") {
        MackeyGlassParams p;
        return {{"beta", p.beta}, {"gamma", p.gamma}, {"alpha", p.alpha}, {"tau", p.tau}};
    }
    if (id == "two_neuron") {
        TwoNeuronParams p;
        return {{"kappa", p.kappa}, {"beta", p.beta}, {"a12", p.a12}, {"a21", p.a21},
                {"tau_s", p.tau_s}, {"tau1", p.tau1}, {"tau2", p.tau2}};
    }
    if (id == "climate") {
        ClimateParams p;
        return {{"a", p.a},         {"b", p.b},     {"c", p.c},       {"kappa", p.kappa},
                {"d_u", p.d_u},     {"d_l", p.d_l}, {"tau1", p.tau1}, {"tau2", p.tau2}};
    }
    if (id == "rossler") {
        RosslerParams p;
        return {{"alpha1", p.alpha1}, {"alpha2", p.alpha2}, {"beta1", p.beta1}, {"beta2", p.beta2},
                {"gamma", p.gamma},   {"tau1", p.tau1},     {"tau2", p.tau2}};
    }
    throw ParameterError("unknown model '" + id + "'");
}

std::vector<std::string> delay_keys(const std::string& id) {
    if (id == "logistic" || id == "mackey_glass") return {"tau"};
    if (id == "two_neuron") return {"tau_s", "tau1", "tau2"};
    if (id == "climate" || id == "rossler") return {"tau1", "tau2"};
    throw ParameterError("unknown model '" + id + "'");
}

DdeSystem make_system(const ModelSpec& model) {
    const auto& p = model.params;
    auto at = [&](const char* k) { return p.at(k); };
    if (model.id == "logistic") return make_logistic({at("r"), at("K"), at("tau")});
    if (model.id == "mackey_glass") return make_mackey_glass({at("beta"), at("gamma"), at("alpha"), at("tau")});
    if (model.id == "two_neuron")
        return make_two_neuron({at("kappa"), at("beta"), at("a12"), at("a21"), at("tau_s"), at("tau1"), at("tau2")});
    if (model.id == "climate")
        return make_climate({at("a"), at("b"), at("c"), at("kappa"), at("d_u"), at("d_l"), at("tau1"), at("tau2")});
    if (model.id == "rossler")
        return make_rossler(
            {at("alpha1"), at("alpha2"), at("beta1"), at("beta2"), at("gamma"), at("tau1"), at("tau2")});
    throw ParameterError("unknown model '" + model.id + "'");
}

NamedValues truth_params(const ModelSpec& model) { return model.params; }

namespace {

// Delay keys ordered by their true value; recovered delays are matched in sorted order.
std::vector<std::string> keys_by_value(const ModelSpec& model) {
    auto keys = delay_keys(model.id);
    std::stable_sort(keys.begin(), keys.end(),
                     [&](const std::string& a, const std::string& b) { return model.params.at(a) < model.params.at(b); });
    return keys;
}

double max_true_delay(const ModelSpec& model) {
    double m = 0.0;
    for (const auto& k : delay_keys(model.id)) m = std::max(m, model.params.at(k));
    return m;
}

void assign_sorted_delays(const ModelSpec& model, std::vector<double> delays, NamedValues& out) {
    auto keys = keys_by_value(model);
    std::sort(delays.begin(), delays.end());
    for (std::size_t j = 0; j < delays.size() && j < keys.size(); ++j) out[keys[j]] = delays[j];
}

double coefficient(const SparseModel& model, const std::string& label, int component) {
    for (std::size_t j = 0; j < model.labels.size(); ++j)
        if (model.labels[j] == label) return model.xi.values(static_cast<Eigen::Index>(j), component);
    return 0.0;
}

}  // namespace

HistorySpec make_history(const HistoryConfig& h, int dim) {
    if (h.kind == "cosine") return HistorySpec::cosine(dim, h.span);
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c[i] = h.value.size() == 1 ? h.value[0] : h.value.at(static_cast<std::size_t>(i));
    return HistorySpec::constant(c, h.span);
}

// ---------------------------------------------------------------- config reading

namespace {

const std::vector<std::string> kSections = {"experiment", "model", "history", "data", "sindy", "search", "ndde"};

std::optional<int> parse_method(const std::string& m) {
    if (m == "E") return 0;
    if (m.size() < 2 || m[0] != 'P') return std::nullopt;
    if (!std::all_of(m.begin() + 1, m.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
    const int M = std::stoi(m.substr(1));
    if (M < 1 || M > 60) return std::nullopt;
    return M;
}

NddeRunConfig read_ndde_run(ConfigReader& r, const std::string& sec, const NddeRunConfig& base, int n,
                            const ModelSpec& model) {
    NddeRunConfig run = base;
    run.label = r.get_string(sec, "label", base.label);
    const std::string layout = r.get_string(sec, "layout", base.layout == InputLayout::full ? "full" : "simplified");
    if (layout == "full") run.layout = InputLayout::full;
    else if (layout == "simplified") run.layout = InputLayout::simplified;
    else r.error(sec, "layout", "expected full or simplified");
    run.current_state = r.get_bool(sec, "current_state", base.current_state);
    {
        std::vector<double> def(base.channels.begin(), base.channels.end());
        const auto ch = r.get_doubles(sec, "channels", def);
        run.channels.clear();
        for (double c : ch) {
            if (c != std::floor(c) || c < 0 || c >= n) {
                r.error(sec, "channels", "channel indices must be integers in [0, " + std::to_string(n) + ")");
                break;
            }
            run.channels.push_back(static_cast<int>(c));
        }
    }
    run.delays = static_cast<int>(r.get_int(sec, "delays", base.delays));
    if (run.delays < 0 || run.delays > 16) r.error(sec, "delays", "expected 0..16 trainable delays");
    run.hidden = static_cast<int>(r.get_int(sec, "hidden", base.hidden));
    if (run.hidden < 1) r.error(sec, "hidden", "hidden layer width must be positive");
    run.tau_max = r.get_double(sec, "tau_max", base.tau_max);
    if (!(run.tau_max > 0)) r.error(sec, "tau_max", "must be positive");
    run.replay_step = r.get_double(sec, "replay_step", base.replay_step);
    if (!(run.replay_step > 0)) r.error(sec, "replay_step", "must be positive");

    TrainConfig& t = run.train;
    const std::string loss = r.get_string(sec, "loss", base.train.loss == LossKind::derivative ? "derivative" : "simulation");
    if (loss == "derivative") t.loss = LossKind::derivative;
    else if (loss == "simulation") t.loss = LossKind::simulation;
    else r.error(sec, "loss", "expected derivative or simulation");
    t.horizon = static_cast<int>(r.get_int(sec, "horizon", base.train.horizon));
    t.substeps = static_cast<int>(r.get_int(sec, "substeps", base.train.substeps));
    t.inverse_time_weights = r.get_bool(sec, "inverse_time_weights", base.train.inverse_time_weights);
    const auto batch = r.get_int(sec, "batch", static_cast<long long>(base.train.batch));
    const auto iters = r.get_int(sec, "iters", static_cast<long long>(base.train.iters));
    if (batch < 1) r.error(sec, "batch", "must be positive");
    if (iters < 1) r.error(sec, "iters", "must be positive");
    t.batch = static_cast<std::size_t>(std::max(1LL, batch));
    t.iters = static_cast<std::size_t>(std::max(1LL, iters));
    t.eta = r.get_double(sec, "eta", base.train.eta);
    t.eta_tau = r.get_double(sec, "eta_tau", base.train.eta_tau);
    if (r.has(sec, "delay_init")) t.delay_init = r.get_doubles(sec, "delay_init", {});
    else r.get_optional_string(sec, "delay_init");
    try {
        validate(t);
    } catch (const std::exception& e) {
        r.error(sec, "", e.what());
    }
    if (t.delay_init) {
        if (static_cast<int>(t.delay_init->size()) != run.delays)
            r.error(sec, "delay_init", "needs one value per trainable delay");
        for (double d : *t.delay_init)
            if (d < 0 || d > run.tau_max) r.error(sec, "delay_init", "initial delays must lie in [0, tau_max]");
    }
    if (run.layout == InputLayout::simplified && run.channels.empty())
        r.error(sec, "channels", "simplified layout needs the channels read at each delay");
    if (run.tau_max < max_true_delay(model))
        r.warning(sec, "tau_max", "tau_max is below the largest model delay; the true delay is unreachable");
    if (run.label.empty()) run.label = std::to_string(run.hidden);
    r.report_unknown(sec);
    return run;
}

}  // namespace

ExperimentConfig read_experiment(const Config& cfg, std::vector<Diagnostic>& diags) {
    ConfigReader r(cfg, diags);
    ExperimentConfig x;

    for (const auto& sec : cfg.sections()) {
        const bool known = std::find(kSections.begin(), kSections.end(), sec) != kSections.end() ||
                           sec.rfind("ndde.", 0) == 0;
        if (sec.empty()) r.error("", "", "keys must follow a [section] header");
        else if (!known) r.error(sec, "", "unknown section");
    }

    // [experiment]
    {
        const std::string s = "experiment";
        std::string stem = std::filesystem::path(cfg.source()).stem().string();
        x.name = r.get_string(s, "name", stem.empty() ? "experiment" : stem);
        x.description = r.get_string(s, "description", "");
        const auto cmd = r.get_string(s, "command", "fit");
        if (auto c = parse_command(cmd)) x.command = *c;
        else r.error(s, "command", "expected simulate, fit, train-ndde or compare");
        const auto seed = r.get_int(s, "seed", 0);
        if (seed < 0) r.error(s, "seed", "must be non-negative");
        x.seed = static_cast<std::uint64_t>(std::max(0LL, seed));
        x.threads = static_cast<int>(r.get_int(s, "threads", 1));
        if (x.threads < 1) r.error(s, "threads", "must be at least 1");
        x.tables = r.get_list(s, "tables", {});
        const auto layouts = table_layouts();
        for (const auto& t : x.tables)
            if (std::find(layouts.begin(), layouts.end(), t) == layouts.end())
                r.error(s, "tables", "unknown table layout '" + t + "'");
        x.report_timing = r.get_bool(s, "report_timing", false);
        r.report_unknown(s);
    }

    // [model]
    {
        const std::string s = "model";
        x.model.id = r.get_string(s, "id", "");
        const auto ids = model_ids();
        if (std::find(ids.begin(), ids.end(), x.model.id) == ids.end()) {
            r.error(s, "id", "expected one of logistic, mackey_glass, two_neuron, climate, rossler");
            x.model.id = "logistic";
        }
        x.model.params = default_params(x.model.id);
        for (auto& [key, value] : x.model.params) value = r.get_double(s, key, value);
        r.report_unknown(s);
        try {
            validate_system(make_system(x.model));
        } catch (const std::exception& e) {
            r.error(s, "", e.what());
        }
    }
    const DdeSystem sys = [&] {
        try {
            return make_system(x.model);
        } catch (const std::exception&) {
            return make_system({x.model.id, default_params(x.model.id)});
        }
    }();
    const int n = sys.n;
    const double tau_true = max_true_delay(x.model);

    // [history]
    {
        const std::string s = "history";
        x.history.kind = r.get_string(s, "kind", "constant");
        if (x.history.kind != "constant" && x.history.kind != "cosine")
            r.error(s, "kind", "expected constant or cosine");
        x.history.value = r.get_doubles(s, "value", {1.0});
        if (x.history.value.size() != 1 && static_cast<int>(x.history.value.size()) != n)
            r.error(s, "value", "needs 1 or " + std::to_string(n) + " values");
        x.history.span = r.get_double(s, "span", 0.0);
        if (x.history.span < 0) r.error(s, "span", "must be non-negative");
        r.report_unknown(s);
    }

    // [data]
    {
        const std::string s = "data";
        DataConfig& d = x.data;
        d.t_start = r.get_double(s, "t_start", 0.0);
        d.t_end = r.get_double(s, "t_end", 30.0);
        d.boundary = r.get_optional_double(s, "boundary");
        d.train_fraction = r.get_double(s, "train_fraction", 0.6);
        const auto dt = r.get_optional_double(s, "dt");
        const auto m = r.get_int(s, "m", 100);
        std::optional<long long> m_train;
        if (r.has(s, "m_train")) m_train = r.get_int(s, "m_train", 0);
        if (!(d.t_end > d.t_start)) r.error(s, "t_end", "must exceed t_start");
        if (d.boundary && !(*d.boundary > d.t_start && *d.boundary < d.t_end))
            r.error(s, "boundary", "must lie strictly inside (t_start, t_end)");
        if (!(d.train_fraction > 0 && d.train_fraction < 1)) r.error(s, "train_fraction", "must lie in (0, 1)");
        if (dt) {
            if (r.has(s, "m") || r.has(s, "m_train")) r.error(s, "dt", "give either dt or m/m_train, not both");
            if (!(*dt > 0)) r.error(s, "dt", "must be positive");
            else {
                const double split = d.boundary.value_or(d.t_start + d.train_fraction * (d.t_end - d.t_start));
                const double ntr = (split - d.t_start) / *dt, nts = (d.t_end - split) / *dt;
                if (std::abs(ntr - std::round(ntr)) > 1e-6 || std::abs(nts - std::round(nts)) > 1e-6)
                    r.error(s, "dt", "both the training and the test window must be whole multiples of dt");
                d.m_train = static_cast<std::size_t>(std::lround(ntr)) + 1;
                d.m = *d.m_train + static_cast<std::size_t>(std::lround(nts));
            }
        } else {
            if (m < 2) r.error(s, "m", "need at least two samples");
            d.m = static_cast<std::size_t>(std::max(2LL, m));
            if (m_train) {
                if (*m_train < 1 || *m_train >= m) r.error(s, "m_train", "must lie in [1, m)");
                else d.m_train = static_cast<std::size_t>(*m_train);
            }
        }
        d.samplings.clear();
        for (const auto& v : r.get_list(s, "sampling", {"uniform"})) {
            if (v == "uniform") d.samplings.push_back(SamplingKind::uniform);
            else if (v == "random") d.samplings.push_back(SamplingKind::random);
            else r.error(s, "sampling", "expected uniform or random");
        }
        if (d.samplings.empty()) d.samplings.push_back(SamplingKind::uniform);
        const auto deriv = r.get_string(s, "derivatives", "exact");
        if (deriv == "exact") d.derivs = DerivMode::exact_rhs;
        else if (deriv == "central") d.derivs = DerivMode::central_difference;
        else if (deriv == "none") d.derivs = DerivMode::none;
        else r.error(s, "derivatives", "expected exact, central or none");
        if (d.derivs == DerivMode::central_difference &&
            std::any_of(d.samplings.begin(), d.samplings.end(), [](SamplingKind k) { return k != SamplingKind::uniform; }))
            r.error(s, "derivatives", "central differences need uniform sampling");
        d.history_span = r.get_double(s, "history_span", 0.0);
        if (d.history_span < 0) r.error(s, "history_span", "must be non-negative");
        d.solver_step = r.get_double(s, "solver_step", 1e-3);
        if (!(d.solver_step > 0)) r.error(s, "solver_step", "must be positive");
        const auto traj = r.get_int(s, "trajectories", 1);
        if (traj < 1) r.error(s, "trajectories", "must be at least 1");
        d.trajectories = static_cast<std::size_t>(std::max(1LL, traj));
        d.perturbation = r.get_double(s, "perturbation", 0.0);
        if (d.perturbation < 0) r.error(s, "perturbation", "must be non-negative");
        d.bound = r.get_double(s, "bound", std::numeric_limits<double>::infinity());
        if (!(d.bound > 0)) r.error(s, "bound", "must be positive");
        if (d.trajectories > 1 && x.history.kind != "constant")
            r.error(s, "trajectories", "several trajectories need a constant base history");
        r.report_unknown(s);
    }

    // [sindy]
    {
        const std::string s = "sindy";
        SindyConfig& c = x.sindy;
        c.methods = r.get_list(s, "methods", {"E"});
        for (const auto& m : c.methods)
            if (!parse_method(m)) r.error(s, "methods", "'" + m + "' is not E or P<M> with 1 <= M <= 60");
        c.degrees.clear();
        for (double d : r.get_doubles(s, "degree", {2.0})) {
            if (d != std::floor(d) || d < 1 || d > 6) r.error(s, "degree", "degrees must be integers in 1..6");
            c.degrees.push_back(static_cast<int>(d));
        }
        if (c.degrees.empty()) c.degrees.push_back(2);
        c.trig = r.get_bool(s, "trig", false);
        c.hill = r.get_bool(s, "hill", false);
        c.hill_alpha = r.get_optional_double(s, "hill_alpha");
        if (c.hill_alpha && !c.hill) r.warning(s, "hill_alpha", "ignored without hill = true");
        if (c.hill && n != 1) r.error(s, "hill", "the Hill column is only supported for scalar models");
        c.regressions.clear();
        for (const auto& v : r.get_list(s, "regression", {"stls"})) {
            if (v == "stls") c.regressions.push_back(RegressionMethod::stls);
            else if (v == "lasso") c.regressions.push_back(RegressionMethod::lasso);
            else r.error(s, "regression", "expected stls or lasso");
        }
        if (c.regressions.empty()) c.regressions.push_back(RegressionMethod::stls);
        c.lambda = r.get_optional_double(s, "lambda");
        if (c.lambda && *c.lambda < 0) r.error(s, "lambda", "must be non-negative");
        c.known_delays = r.get_bool(s, "known_delays", false);
        r.report_unknown(s);
    }

    // [search]
    {
        const std::string s = "search";
        SearchConfig& c = x.search;
        c.optimizers = r.get_list(s, "optimizers", {"PS"});
        for (const auto& o : c.optimizers)
            if (o != "BF" && o != "BO" && o != "PS") r.error(s, "optimizers", "expected BF, BO or PS");
        std::vector<std::string> names = delay_keys(x.model.id);
        names.push_back("tau_bar");
        names.push_back("alpha");
        for (const auto& k : names)
            if (auto b = r.get_bounds(s, k)) {
                if (b->first < 0) r.error(s, k, "bounds must be non-negative");
                c.bounds[k] = *b;
            }
        c.grid.clear();
        for (double g : r.get_doubles(s, "grid", {1000.0})) {
            if (g != std::floor(g) || g < 2) r.error(s, "grid", "grid counts must be integers >= 2");
            c.grid.push_back(static_cast<int>(std::max(2.0, g)));
        }
        c.pso.swarm_size = static_cast<int>(r.get_int(s, "pso_swarm", c.pso.swarm_size));
        c.pso.max_iters = static_cast<int>(r.get_int(s, "pso_iters", c.pso.max_iters));
        c.pso.stall_tol = r.get_double(s, "pso_stall_tol", c.pso.stall_tol);
        c.pso.stall_window = static_cast<int>(r.get_int(s, "pso_stall_window", c.pso.stall_window));
        c.bo.budget = static_cast<int>(r.get_int(s, "bo_budget", c.bo.budget));
        c.bo.n_init = static_cast<int>(r.get_int(s, "bo_init", c.bo.n_init));
        if (c.pso.swarm_size < 2) r.error(s, "pso_swarm", "must be at least 2");
        if (c.pso.max_iters < 1) r.error(s, "pso_iters", "must be positive");
        if (c.pso.stall_window < 1) r.error(s, "pso_stall_window", "must be positive");
        if (!(c.pso.stall_tol >= 0)) r.error(s, "pso_stall_tol", "must be non-negative");
        if (c.bo.n_init < 2 || c.bo.budget < c.bo.n_init) r.error(s, "bo_budget", "need bo_budget >= bo_init >= 2");
        c.pso.seed = c.bo.seed = x.seed;
        c.pso.threads = x.threads;
        r.report_unknown(s);

        for (const auto& [k, b] : c.bounds) {
            if (k == "tau_bar") {
                if (b.second < tau_true)
                    r.warning(s, k, "tau_bar upper bound " + format_double(b.second) +
                                        " is below the model delay " + format_double(tau_true));
            } else {
                const double truth = x.model.params.at(k);
                if (truth < b.first || truth > b.second)
                    r.warning(s, k, "the model value " + format_double(truth) + " lies outside the search bounds");
            }
        }
    }

    // [ndde] and [ndde.<name>]
    {
        NddeRunConfig base;
        base.channels = {0};
        base.tau_max = 2.0 * max_true_delay(x.model);
        if (x.model.id == "climate") base.current_state = false;
        std::vector<std::string> runs;
        for (const auto& sec : cfg.sections())
            if (sec.rfind("ndde.", 0) == 0) runs.push_back(sec);
        if (cfg.has_section("ndde")) base = read_ndde_run(r, "ndde", base, n, x.model);
        if (runs.empty() && cfg.has_section("ndde")) x.ndde.push_back(base);
        for (const auto& sec : runs) {
            NddeRunConfig run = read_ndde_run(r, sec, base, n, x.model);
            if (!r.has(sec, "label")) run.label = sec.substr(5);
            x.ndde.push_back(run);
        }
    }

    // Cross-section checks.
    const bool needs_sindy = x.command == Command::fit || x.command == Command::compare;
    const bool needs_ndde = x.command == Command::train_ndde || (x.command == Command::compare && !x.ndde.empty());
    if (needs_sindy) {
        if (x.data.derivs == DerivMode::none) r.error("data", "derivatives", "SINDy fits need derivatives");
        if (!x.sindy.known_delays)
            for (const auto& m : x.sindy.methods) {
                const bool e = m == "E";
                std::vector<std::string> need = e ? delay_keys(x.model.id) : std::vector<std::string>{"tau_bar"};
                if (x.sindy.hill && !x.sindy.hill_alpha) need.push_back("alpha");
                for (const auto& k : need)
                    if (!x.search.bounds.count(k))
                        r.error("search", k, "method " + m + " needs search bounds '" + k + " = lower, upper'");
                if (std::find(x.search.optimizers.begin(), x.search.optimizers.end(), "BF") != x.search.optimizers.end() &&
                    x.search.grid.size() != 1 && x.search.grid.size() != need.size())
                    r.error("search", "grid", "give one grid count or one per search dimension (" +
                                                  std::to_string(need.size()) + " for " + m + ")");
            }
    }
    if (needs_ndde) {
        if (x.ndde.empty()) r.error("ndde", "", "NDDE training needs an [ndde] section");
        if (x.data.samplings.size() != 1 || x.data.samplings[0] != SamplingKind::uniform)
            r.error("data", "sampling", "NDDE training needs one uniform sampling");
        if (x.data.derivs == DerivMode::none) r.error("data", "derivatives", "NDDE training needs derivatives");
        for (const auto& run : x.ndde)
            if (x.data.history_span + 1e-12 < run.tau_max)
                r.warning("data", "history_span", "history_span is shorter than tau_max of run '" + run.label +
                                                      "'; early rows are skipped");
    }
    if (x.command != Command::simulate && x.tables.empty())
        r.warning("experiment", "tables", "no table layouts requested");

    // Solver history must reach back over the model delay and every lookup.
    double need = tau_true;
    for (const auto& [k, b] : x.search.bounds)
        if (k != "alpha") need = std::max(need, b.second);
    for (const auto& run : x.ndde) need = std::max(need, run.tau_max);
    need = std::max(need, x.data.history_span);
    if (x.history.span == 0.0) x.history.span = need;
    else if (x.history.span + 1e-12 < need)
        r.error("history", "span", "must cover " + format_double(need) + " (largest delay, bound or lookup)");
    return x;
}

ExperimentConfig load_experiment(const std::string& path, std::vector<Diagnostic>& warnings) {
    std::vector<Diagnostic> diags;
    const Config cfg = Config::load(path, diags);
    ExperimentConfig x = read_experiment(cfg, diags);
    std::string errors;
    for (const auto& d : diags) {
        if (d.severity == Diagnostic::Severity::error) errors += d.str() + "\n";
        else warnings.push_back(d);
    }
    if (!errors.empty()) throw ConfigError(errors);
    return x;
}

// ---------------------------------------------------------------- data

DataSet generate_data(const ExperimentConfig& cfg, SamplingKind sampling) {
    const DdeSystem sys = make_system(cfg.model);
    SolveConfig sc;
    sc.step = cfg.data.solver_step;
    sc.t0 = cfg.data.t_start;
    sc.t_end = cfg.data.t_end;
    SplitSpec sp;
    sp.t_start = cfg.data.t_start;
    sp.t_end = cfg.data.t_end;
    sp.boundary = cfg.data.boundary;
    sp.train_fraction = cfg.data.train_fraction;
    sp.sampling = sampling;
    sp.m = cfg.data.m;
    sp.m_train = cfg.data.m_train;
    sp.seed = cfg.seed;
    sp.history_span = cfg.data.history_span;

    DataSet out;
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const HistorySpec base = make_history(cfg.history, sys.n);
    const std::size_t max_tries = 20 * cfg.data.trajectories + 20;
    for (std::size_t tries = 0; out.train.size() < cfg.data.trajectories; ++tries) {
        if (tries >= max_tries)
            throw DivergenceError("no bounded trajectory after " + std::to_string(tries) + " perturbed histories",
                                  cfg.data.t_end);
        HistorySpec history = base;
        if (tries > 0) {
            Vec c = base.value(0.0);
            for (Eigen::Index i = 0; i < c.size(); ++i) c[i] += cfg.data.perturbation * unit(rng);
            history = HistorySpec::constant(c, base.span());
        }
        const DenseSolution sol = solve_dde(sys, history, sc);
        auto [train, test] = sample_trajectory(sol, &sys, sp, cfg.data.derivs);
        const double peak = std::max(train.states.cwiseAbs().maxCoeff(), test.states.cwiseAbs().maxCoeff());
        if (!(peak <= cfg.data.bound)) {
            if (tries == 0) throw DivergenceError("base trajectory leaves the configured bound", cfg.data.t_end);
            continue;
        }
        train.label = cfg.model.id + "_train";
        test.label = cfg.model.id + "_test";
        out.train.push_back(std::move(train));
        out.test.push_back(std::move(test));
    }
    return out;
}

// ---------------------------------------------------------------- SINDy

NamedValues recovered_params(const ExperimentConfig& cfg, const SparseModel& model) {
    NamedValues out;
    if (model.kind == SindyKind::e_sindy) {
        assign_sorted_delays(cfg.model, model.delays, out);
    } else {
        const auto keys = keys_by_value(cfg.model);
        out[keys.back()] = model.scheme->tau_bar;
    }
    if (model.spec.hill) out["alpha"] = model.spec.hill->alpha;
    if (cfg.model.id == "logistic") {
        out["r"] = coefficient(model, "x", 0);
    } else if (cfg.model.id == "mackey_glass") {
        out["gamma"] = -coefficient(model, "x", 0);
        if (model.spec.hill) {
            const auto names = variable_names(model.spec);
            const auto& v = names.at(static_cast<std::size_t>(model.spec.hill->block * model.spec.n + model.spec.hill->column));
            out["beta"] = coefficient(model, v + "*h(" + v + ")", 0);
        }
    }
    return out;
}

SindyRun run_sindy(const ExperimentConfig& cfg, const Trajectory& train, const Trajectory& test,
                   const std::string& method, const std::string& optimizer, RegressionMethod regression,
                   int degree) {
    const auto M = parse_method(method);
    if (!M) throw ParameterError("unknown SINDy method '" + method + "'");
    const bool e = *M == 0;
    const int n = train.dim();
    const auto dkeys = delay_keys(cfg.model.id);
    const int k = static_cast<int>(dkeys.size());

    SindyProblem problem;
    problem.kind = e ? SindyKind::e_sindy : SindyKind::p_sindy;
    problem.delay_count = k;
    problem.M = e ? 1 : *M;
    problem.spec = e ? LibrarySpec::with_delays(n, degree, k, cfg.sindy.trig)
                     : LibrarySpec::with_nodes(n, degree, *M, cfg.sindy.trig);
    if (cfg.sindy.hill) problem.spec.hill = HillTerm{cfg.sindy.hill_alpha.value_or(1.0), e ? 1 : *M, 0};
    problem.reg.method = regression;
    problem.reg.lambda = cfg.sindy.lambda;
    problem.train = &train;

    // Search dimensions; a fixed Hill exponent is appended to every point.
    SindyRun run;
    const bool search_alpha = cfg.sindy.hill && !cfg.sindy.hill_alpha;
    std::vector<std::string> names = e ? dkeys : std::vector<std::string>{"tau_bar"};
    if (search_alpha) names.push_back("alpha");
    const auto complete = [&](const Vec& p) {
        if (!cfg.sindy.hill || search_alpha) return p;
        Vec full(p.size() + 1);
        full << p, *cfg.sindy.hill_alpha;
        return full;
    };

    WallTimer timer;
    Vec point;
    if (optimizer == "-") {
        point.resize(static_cast<Eigen::Index>(names.size()));
        for (std::size_t i = 0; i < names.size(); ++i)
            point[static_cast<Eigen::Index>(i)] =
                names[i] == "tau_bar" ? max_true_delay(cfg.model) : cfg.model.params.at(names[i]);
    } else {
        SearchSpace space;
        for (const auto& nm : names) {
            const auto it = cfg.search.bounds.find(nm);
            if (it == cfg.search.bounds.end()) throw ConfigError("missing search bounds for '" + nm + "'");
            run.dims.push_back({nm, it->second.first, it->second.second});
        }
        space.dims = run.dims;
        space.objective = [&](const Vec& p) { return problem.objective(complete(p)); };
        OptResult res;
        if (optimizer == "BF") {
            std::vector<int> counts = cfg.search.grid;
            if (counts.size() == 1) counts.assign(names.size(), counts[0]);
            res = brute_force(space, counts, cfg.threads);
        } else if (optimizer == "BO") {
            res = bayes_opt(space, cfg.search.bo);
        } else if (optimizer == "PS") {
            PsoConfig pc = cfg.search.pso;
            pc.threads = cfg.threads;
            res = particle_swarm(space, pc);
        } else {
            throw ParameterError("unknown optimizer '" + optimizer + "'");
        }
        point = res.best_point;
        run.search = std::move(res);
    }
    run.fit = problem.fit(complete(point));
    const double elapsed = timer.seconds();

    run.report = evaluate(run.fit.model, train, test);
    run.report.sindy_calls = run.search ? run.search->calls : 1;
    run.report.wall_time = elapsed;
    run.recovered = recovered_params(cfg, run.fit.model);

    BenchmarkRow& row = run.row;
    row.group = cfg.model.id;
    row.method = method;
    row.optimizer = optimizer;
    row.regression = regression == RegressionMethod::stls ? "STLS" : "LASSO";
    row.param_errors = param_error(truth_params(cfg.model), run.recovered);
    row.rmse_deriv_train = run.report.rmse_deriv_train;
    row.rmse_deriv = run.report.rmse_deriv_test;
    row.rmse_traj = run.report.rmse_traj_test;
    if (run.search) row.calls = run.search->calls;
    if (cfg.report_timing) row.time_s = elapsed;
    return run;
}

// ---------------------------------------------------------------- NDDE

NddeModel build_ndde(const ExperimentConfig& cfg, const NddeRunConfig& run) {
    const DdeSystem sys = make_system(cfg.model);
    std::vector<int> all(static_cast<std::size_t>(sys.n));
    std::iota(all.begin(), all.end(), 0);
    std::vector<DelaySlot> slots;
    if (run.current_state) slots.push_back({0.0, false, all});
    const auto& delayed = run.layout == InputLayout::full ? all : run.channels;
    for (int j = 0; j < run.delays; ++j) slots.push_back({0.5 * run.tau_max, true, delayed});
    return make_ndde(sys.n, slots, run.hidden, run.hidden, static_cast<bool>(sys.input), run.tau_max, run.layout);
}

NddeRun run_ndde(const ExperimentConfig& cfg, const NddeRunConfig& run, const DataSet& data) {
    std::vector<NddeSeries> series;
    for (const auto& t : data.train) series.push_back(make_series(t));
    TrainConfig tc = run.train;
    tc.seed = cfg.seed;

    NddeRun out;
    out.record = train(build_ndde(cfg, run), series, tc);
    ReplayConfig rc;
    rc.step = run.replay_step;
    out.report = evaluate_ndde(out.record.best, data.train.front(), data.test.front(), rc);
    assign_sorted_delays(cfg.model, out.record.best.delays(), out.recovered);

    BenchmarkRow& row = out.row;
    row.group = run.label;
    row.method = std::string("NDDE-") + (tc.loss == LossKind::derivative ? "derivative" : "simulation");
    row.param_errors = param_error(truth_params(cfg.model), out.recovered);
    const auto rows = eligible_rows(out.record.best, series, true, 0);
    row.train_loss = rows.empty() ? 0.0 : derivative_loss(out.record.best, series, rows, tc.inverse_time_weights).loss;
    row.rmse_deriv = out.report.rmse_deriv_test;
    row.rmse_traj = out.report.rmse_traj_test;
    row.iters = tc.iters;
    if (cfg.report_timing) row.time_s = out.record.wall_time;
    return out;
}

// ---------------------------------------------------------------- runner

namespace {

std::string sampling_name(SamplingKind k) { return k == SamplingKind::uniform ? "uniform" : "random"; }

std::string file_token(std::string s) {
    for (char& c : s)
        if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '.'))
            c = '_';
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << text;
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

template <class F>
void write_with(const std::filesystem::path& path, F&& f) {
    std::ostringstream os;
    f(os);
    write_file(path, os.str());
}

bool is_ndde_layout(const std::string& id) {
    return id == "table5" || id == "table6" || id == "table7" || id == "table9";
}

std::string summary_values(const NamedValues& v) {
    std::string s;
    for (const auto& [k, x] : v) {
        if (!s.empty()) s += ' ';
        s += k + "=" + format_scientific(x, 5);
    }
    return s;
}

void report_lines(std::ostream& os, const BenchmarkRow& row, const NamedValues& recovered, const FitReport* sindy,
                  bool timing) {
    const std::string prefix = row.group + "," + row.method + "," + row.optimizer + "," + row.regression + ",";
    for (const auto& [k, v] : recovered) os << prefix << "recovered_" << k << ',' << format_double(v) << '\n';
    for (const auto& [k, v] : row.param_errors) os << prefix << "abs_error_" << k << ',' << format_double(v) << '\n';
    if (row.rmse_deriv_train) os << prefix << "rmse_deriv_train," << format_double(*row.rmse_deriv_train) << '\n';
    if (row.train_loss) os << prefix << "train_loss," << format_double(*row.train_loss) << '\n';
    if (row.rmse_deriv) os << prefix << "rmse_deriv_test," << format_double(*row.rmse_deriv) << '\n';
    if (row.rmse_traj) os << prefix << "rmse_traj_test," << format_double(*row.rmse_traj) << '\n';
    if (row.calls) os << prefix << "calls," << *row.calls << '\n';
    if (row.iters) os << prefix << "iters," << *row.iters << '\n';
    if (sindy) {
        for (const auto& f : sindy->flags) os << prefix << "flag," << file_token(f) << '\n';
        if (timing) os << prefix << "time_s," << format_double(sindy->wall_time) << '\n';
    } else if (timing && row.time_s) {
        os << prefix << "time_s," << format_double(*row.time_s) << '\n';
    }
}

void write_data(const DataSet& data, const std::filesystem::path& out, const std::string& suffix) {
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        const std::string tag = suffix + (i == 0 ? "" : "_" + std::to_string(i));
        write_with(out / ("trajectory_train" + tag + ".csv"), [&](std::ostream& os) { write_trajectory_csv(os, data.train[i]); });
        write_with(out / ("trajectory_test" + tag + ".csv"), [&](std::ostream& os) { write_trajectory_csv(os, data.test[i]); });
    }
}

void write_sindy_artifacts(const SindyRun& run, const std::filesystem::path& out, const std::string& tag) {
    write_with(out / ("coefficients_" + tag + ".csv"), [&](std::ostream& os) {
        write_coefficients_csv(os, run.fit.model.xi, run.fit.model.labels);
    });
    if (run.search)
        write_with(out / ("trace_" + tag + ".csv"), [&](std::ostream& os) { write_trace_csv(os, *run.search, run.dims); });
}

}  // namespace

std::map<std::string, std::vector<BenchmarkRow>> run_experiment(Command command, const ExperimentConfig& cfg,
                                                                const std::filesystem::path& out,
                                                                std::ostream& log) {
    std::filesystem::create_directories(out);
    std::vector<BenchmarkRow> sindy_rows, ndde_rows;
    std::ostringstream report;
    report << "group,method,optimizer,regression,quantity,value\n";
    WallTimer total;

    log << cfg.name << " (" << command_name(command) << ", model " << cfg.model.id << ", seed " << cfg.seed << ")\n";
    if (!cfg.description.empty()) log << "  " << cfg.description << "\n";

    const bool multi_sampling = cfg.data.samplings.size() > 1;
    if (command == Command::simulate) {
        for (auto sampling : cfg.data.samplings) {
            const DataSet data = generate_data(cfg, sampling);
            write_data(data, out, multi_sampling ? "_" + sampling_name(sampling) : "");
            log << "  " << sampling_name(sampling) << ": " << data.train.size() << " trajectory set(s), "
                << data.train.front().size() << " train / " << data.test.front().size() << " test samples\n";
        }
    } else if (command == Command::fit) {
        for (auto sampling : cfg.data.samplings) {
            const DataSet data = generate_data(cfg, sampling);
            write_data(data, out, multi_sampling ? "_" + sampling_name(sampling) : "");
            for (auto reg : cfg.sindy.regressions)
                for (const auto& method : cfg.sindy.methods) {
                    const auto optimizers =
                        cfg.sindy.known_delays ? std::vector<std::string>{"-"} : cfg.search.optimizers;
                    for (const auto& opt : optimizers) {
                        SindyRun run = run_sindy(cfg, data.train.front(), data.test.front(), method, opt, reg,
                                                 cfg.sindy.degrees.front());
                        if (multi_sampling) run.row.group = sampling_name(sampling);
                        const std::string tag = file_token(
                            (multi_sampling ? sampling_name(sampling) + "_" : "") + method + "_" +
                            (opt == "-" ? "known" : opt) + "_" + run.row.regression);
                        write_sindy_artifacts(run, out, tag);
                        report_lines(report, run.row, run.recovered, &run.report, cfg.report_timing);
                        log << "  " << run.row.group << " " << method << "/" << opt << "/" << run.row.regression
                            << ": " << summary_values(run.recovered) << " | RMSE_dx "
                            << format_scientific(run.report.rmse_deriv_test, 3) << " RMSE_x "
                            << format_scientific(run.report.rmse_traj_test, 3) << " | calls "
                            << run.report.sindy_calls << " | " << format_scientific(run.report.wall_time, 3)
                            << " s\n";
                        sindy_rows.push_back(std::move(run.row));
                    }
                }
        }
    } else {
        const DataSet data = generate_data(cfg, cfg.data.samplings.front());
        write_data(data, out, "");
        if (command == Command::compare) {
            for (int degree : cfg.sindy.degrees)
                for (const auto& method : cfg.sindy.methods)
                    for (const auto& opt : cfg.search.optimizers) {
                        SindyRun run = run_sindy(cfg, data.train.front(), data.test.front(), method, opt,
                                                 cfg.sindy.regressions.front(), degree);
                        run.row.group = std::to_string(degree);
                        const std::string tag = file_token("d" + std::to_string(degree) + "_" + method + "_" + opt);
                        write_sindy_artifacts(run, out, tag);
                        report_lines(report, run.row, run.recovered, &run.report, cfg.report_timing);
                        log << "  degree " << degree << " " << method << "/" << opt << ": "
                            << summary_values(run.recovered) << " | RMSE_dx "
                            << format_scientific(run.report.rmse_deriv_test, 3) << " RMSE_x "
                            << format_scientific(run.report.rmse_traj_test, 3) << " | calls "
                            << run.report.sindy_calls << " | " << format_scientific(run.report.wall_time, 3)
                            << " s\n";
                        sindy_rows.push_back(std::move(run.row));
                    }
        }
        for (const auto& rc : cfg.ndde) {
            NddeRun run = run_ndde(cfg, rc, data);
            const std::string tag = file_token(rc.label);
            write_with(out / ("ndde_" + tag + ".ckpt"), [&](std::ostream& os) { write_checkpoint(os, run.record.best); });
            write_with(out / ("ndde_" + tag + "_train.csv"),
                       [&](std::ostream& os) { write_train_record_csv(os, run.record); });
            report_lines(report, run.row, run.recovered, nullptr, cfg.report_timing);
            for (const auto& f : run.report.flags) log << "  note: " << f << "\n";
            log << "  NDDE " << rc.label << " (" << run.row.method << "): " << summary_values(run.recovered)
                << " | RMSE_dx " << format_scientific(run.report.rmse_deriv_test, 3) << " RMSE_x "
                << format_scientific(run.report.rmse_traj_test, 3) << " | best iter " << run.record.best_iter
                << " | " << format_scientific(run.record.wall_time, 3) << " s\n";
            ndde_rows.push_back(std::move(run.row));
        }
    }

    std::map<std::string, std::vector<BenchmarkRow>> tables;
    for (const auto& id : cfg.tables) {
        auto rows = is_ndde_layout(id) ? ndde_rows : sindy_rows;
        if (id == "table4") {
            rows.erase(std::remove_if(rows.begin(), rows.end(), [](const BenchmarkRow& r) { return r.optimizer == "-"; }),
                       rows.end());
            for (auto& r : rows) r.group = cfg.model.id;
        }
        write_file(out / ("table_" + id + ".csv"), emit_table(rows, id));
        tables[id] = std::move(rows);
    }
    if (command != Command::simulate) write_file(out / "fit_report.csv", report.str());
    log << "  wrote " << out.string() << " in " << format_scientific(total.seconds(), 3) << " s\n";
    return tables;
}

std::string list_benchmarks(const std::filesystem::path& dir) {
    std::ostringstream os;
    os << "models:";
    for (const auto& id : model_ids()) os << ' ' << id;
    os << "\n";
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(dir))
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().extension() == ".ini") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    os << "configs in " << dir.string() << ":\n";
    for (const auto& f : files) {
        std::vector<Diagnostic> diags;
        const Config cfg = Config::load(f.string(), diags);
        const auto* cmd = cfg.find("experiment", "command");
        const auto* desc = cfg.find("experiment", "description");
        const auto* model = cfg.find("model", "id");
        os << "  " << f.stem().string() << "  [" << (cmd ? cmd->text : "fit") << ", "
           << (model ? model->text : "?") << "]";
        if (desc) os << "  " << desc->text;
        os << "\n";
    }
    return os.str();
}

}  // namespace delayid
