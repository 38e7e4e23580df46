#include "delayid/sindy.hpp"

#include "delayid/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace delayid {

double SparseModel::reach() const {
    if (kind == SindyKind::p_sindy) return scheme ? scheme->tau_bar : 0.0;
    return delays.empty() ? 0.0 : *std::max_element(delays.begin(), delays.end());
}

namespace {

void require_derivs(const Trajectory& traj) {
    if (!traj.derivs) throw ParameterError("trajectory has no derivatives to regress on");
}

SindyFit finish_fit(SparseModel model, const Mat& theta, const Mat& dx, const RegressionConfig& reg) {
    model.xi = regress(theta, dx, reg);
    SindyFit fit;
    fit.epsilon = rmse(dx, theta * model.xi.values);
    fit.model = std::move(model);
    return fit;
}

}  // namespace

SindyFit esindy_fit(const Trajectory& train, const std::vector<double>& delays, const LibrarySpec& spec,
                    const RegressionConfig& reg) {
    require_derivs(train);
    if (spec.blocks() != static_cast<int>(delays.size()) + 1)
        throw DimensionError("library block count must be 1 + number of delays");
    if (spec.n != train.dim()) throw DimensionError("library width differs from state dimension");
    SparseModel model;
    model.kind = SindyKind::e_sindy;
    model.delays = delays;
    model.spec = spec;
    const Library lib(spec);
    model.labels = lib.labels();
    std::vector<Mat> blocks{train.states};
    for (double tau : delays) blocks.push_back(delayed_states(train, tau));
    const LibraryMatrix theta = lib.build(blocks);
    return finish_fit(std::move(model), theta.values, *train.derivs, reg);
}

SindyFit psindy_fit(const Trajectory& train, double tau_bar, int M, const LibrarySpec& spec,
                    const RegressionConfig& reg) {
    require_derivs(train);
    if (spec.blocks() != M + 1) throw DimensionError("library block count must be M + 1");
    if (spec.n != train.dim()) throw DimensionError("library width differs from state dimension");
    SparseModel model;
    model.kind = SindyKind::p_sindy;
    model.scheme = make_scheme(M, tau_bar);
    model.spec = spec;
    const Library lib(spec);
    model.labels = lib.labels();
    const LibraryMatrix theta = lib.build(collocated_states(train, *model.scheme));
    return finish_fit(std::move(model), theta.values, *train.derivs, reg);
}

Mat model_library(const SparseModel& model, const Trajectory& traj) {
    const Library lib(model.spec);
    if (model.kind == SindyKind::p_sindy) return lib.build(collocated_states(traj, *model.scheme)).values;
    std::vector<Mat> blocks{traj.states};
    for (double tau : model.delays) blocks.push_back(delayed_states(traj, tau));
    return lib.build(blocks).values;
}

Mat predict_derivatives(const SparseModel& model, const Trajectory& traj) {
    return model_library(model, traj) * model.xi.values;
}

DdeSystem as_dde(const SparseModel& model) {
    if (model.kind != SindyKind::e_sindy) throw UnsupportedError("only E-SINDy models are DDEs");
    // The optimizer may propose repeated or unsorted delays; the system gets the
    // sorted distinct set and each library block keeps its own index into it.
    std::vector<double> uniq = model.delays;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<std::size_t> map;
    for (double tau : model.delays)
        map.push_back(static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), tau) - uniq.begin()));
    const auto lib = std::make_shared<const Library>(model.spec);
    const Mat xi = model.xi.values;
    const int n = model.spec.n;
    DdeSystem sys;
    sys.n = n;
    sys.delays = uniq;
    sys.label = "esindy";
    sys.rhs = [lib, xi, map, n](double, const Vec& x, const std::vector<Vec>& delayed, double) {
        Vec inputs(static_cast<Eigen::Index>(n) * static_cast<Eigen::Index>(map.size() + 1));
        inputs.head(n) = x;
        for (std::size_t b = 0; b < map.size(); ++b)
            inputs.segment(static_cast<Eigen::Index>(b + 1) * n, n) = delayed[map[b]];
        return lib->apply(xi, inputs);
    };
    validate_system(sys);
    return sys;
}

DenseSolution simulate_esindy(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                              const ReplayConfig& cfg) {
    const DdeSystem sys = as_dde(model);
    SolveConfig sc;
    sc.step = cfg.step;
    sc.t0 = t0;
    sc.t_end = t_end;
    return solve_dde(sys, history, sc);
}

DenseSolution simulate_psindy(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                              const ReplayConfig& cfg) {
    if (model.kind != SindyKind::p_sindy || !model.scheme) throw UnsupportedError("not a P-SINDy model");
    const CollocationScheme& sc = *model.scheme;
    const int n = model.spec.n;
    const auto lib = std::make_shared<const Library>(model.spec);
    const Mat xi = model.xi.values;
    // Block 0 of the library input is U itself: the library was built on node values.
    const OdeRhs rhs = [&sc, lib, xi, n](double, const Vec& U) {
        Vec dU(U.size());
        dU.head(n) = lib->apply(xi, U);
        for (int i = 1; i <= sc.M; ++i) {
            Vec acc = Vec::Zero(n);
            for (int j = 0; j <= sc.M; ++j) acc += sc.D(i - 1, j) * node_block(U, n, j);
            dU.segment(static_cast<Eigen::Index>(i) * n, n) = acc;
        }
        return dU;
    };
    SolveConfig cfg_ode;
    cfg_ode.step = cfg.step;
    cfg_ode.t0 = t0;
    cfg_ode.t_end = t_end;
    const DenseSolution full = solve_ode(rhs, restrict_history(sc, history), cfg_ode);
    return full.block(0, n, history);
}

DenseSolution simulate(const SparseModel& model, const HistorySpec& history, double t0, double t_end,
                       const ReplayConfig& cfg) {
    return model.kind == SindyKind::e_sindy ? simulate_esindy(model, history, t0, t_end, cfg)
                                            : simulate_psindy(model, history, t0, t_end, cfg);
}

std::pair<HistorySpec, double> replay_history(const Trajectory& test, double span, bool use_dense) {
    if (test.dense && use_dense) {
        const double t0 = test.window_start;
        return {test.dense->history_before(t0, span), t0};
    }
    if (test.history_times.empty()) throw DomainError("test trajectory has no preceding data for replay");
    const double t0 = test.history_times.back();
    const auto& ht = test.history_times;
    std::size_t first = static_cast<std::size_t>(std::lower_bound(ht.begin(), ht.end(), t0 - span) - ht.begin());
    if (first > 0 && ht[std::min(first, ht.size() - 1)] > t0 - span) --first;
    std::vector<double> rel;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = first; i < ht.size(); ++i) {
        rel.push_back(ht[i] - t0);
        rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rel.front() > -span + 1e-9 * std::max(1.0, span))
        throw DomainError("not enough data before the test window to cover the model's delays");
    Mat values(static_cast<Eigen::Index>(rows.size()), test.dim());
    for (std::size_t k = 0; k < rows.size(); ++k) values.row(static_cast<Eigen::Index>(k)) = test.history_states.row(rows[k]);
    rel.back() = 0.0;
    return {HistorySpec::sampled(std::move(rel), std::move(values)), t0};
}

FitReport evaluate(const SparseModel& model, const Trajectory& train, const Trajectory& test, const ReplayConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    FitReport rep;
    if (train.derivs) rep.rmse_deriv_train = rmse(*train.derivs, predict_derivatives(model, train));
    if (test.derivs) rep.rmse_deriv_test = rmse(*test.derivs, predict_derivatives(model, test));
    try {
        const auto [hist, t0] = replay_history(test, model.reach());
        const DenseSolution sim = simulate(model, hist, t0, test.times.back(), cfg);
        Mat pred(test.states.rows(), test.states.cols());
        for (std::size_t i = 0; i < test.times.size(); ++i)
            pred.row(static_cast<Eigen::Index>(i)) = sim.value(test.times[i]).transpose();
        rep.rmse_traj_test = rmse(pred, test.states);
    } catch (const DivergenceError& e) {
        rep.rmse_traj_test = std::numeric_limits<double>::infinity();
        rep.flags.push_back(std::string("replay diverged: ") + e.what());
    } catch (const DomainError& e) {
        // e.g. a Hill term evaluated on a negative replayed state
        rep.rmse_traj_test = std::numeric_limits<double>::infinity();
        rep.flags.push_back(std::string("replay left the model's domain: ") + e.what());
    }
    if (model.kind == SindyKind::e_sindy)
        for (std::size_t j = 0; j < model.delays.size(); ++j)
            rep.recovered["tau" + std::to_string(j + 1)] = model.delays[j];
    else
        rep.recovered["tau_bar"] = model.scheme->tau_bar;
    if (model.spec.hill) rep.recovered["alpha"] = model.spec.hill->alpha;
    for (std::size_t j = 0; j < model.labels.size(); ++j)
        for (Eigen::Index c = 0; c < model.xi.values.cols(); ++c)
            if (model.xi.values(static_cast<Eigen::Index>(j), c) != 0.0) {
                std::string key = "xi[" + model.labels[j] + "]";
                if (model.xi.values.cols() > 1) key += "_" + std::to_string(c + 1);
                rep.recovered[key] = model.xi.values(static_cast<Eigen::Index>(j), c);
            }
    rep.flags.insert(rep.flags.end(), model.xi.flags.begin(), model.xi.flags.end());
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

std::size_t SindyProblem::dimension() const {
    const std::size_t base = kind == SindyKind::e_sindy ? static_cast<std::size_t>(delay_count) : 1;
    return base + (spec.hill ? 1 : 0);
}

SindyFit SindyProblem::fit(const Vec& point) const {
    if (!train) throw ParameterError("SindyProblem without training data");
    if (static_cast<std::size_t>(point.size()) != dimension()) throw DimensionError("optimizer point has wrong dimension");
    LibrarySpec s = spec;
    if (s.hill) s.hill->alpha = point[point.size() - 1];
    if (kind == SindyKind::e_sindy) {
        std::vector<double> delays(point.data(), point.data() + delay_count);
        return esindy_fit(*train, delays, s, reg);
    }
    return psindy_fit(*train, point[0], M, s, reg);
}

double SindyProblem::objective(const Vec& point) const {
    try {
        const double e = fit(point).epsilon;
        return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const ParameterError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace delayid
