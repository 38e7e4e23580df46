#include "delayid/ndde.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <type_traits>

namespace delayid {

namespace {

constexpr double kGridTol = 1e-9;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

int NddeModel::input_width() const {
    int w = has_exogenous ? 1 : 0;
    for (const auto& s : slots) w += static_cast<int>(s.channels.size());
    return w;
}

std::vector<double> NddeModel::delays() const {
    std::vector<double> out;
    for (const auto& s : slots)
        if (s.trainable) out.push_back(s.tau);
    return out;
}

std::size_t NddeModel::weight_count() const {
    return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size() + W3.size());
}

NddeModel make_ndde(int n, std::vector<DelaySlot> slots, int l1, int l2, bool exogenous, double tau_max,
                    InputLayout layout) {
    if (n < 1 || l1 < 1 || l2 < 1) throw ParameterError("ndde: dimensions must be positive");
    NddeModel m;
    m.n = n;
    m.slots = std::move(slots);
    m.layout = layout;
    m.has_exogenous = exogenous;
    m.tau_max = tau_max;
    const int w = m.input_width();
    m.W1 = Mat::Zero(l1, w);
    m.b1 = Vec::Zero(l1);
    m.W2 = Mat::Zero(l2, l1);
    m.b2 = Vec::Zero(l2);
    m.W3 = Mat::Zero(n, l2);
    validate(m);
    return m;
}

NddeModel make_ndde_full(int n, const std::vector<double>& delays, int l1, int l2, double tau_max, bool exogenous) {
    std::vector<int> all(static_cast<std::size_t>(std::max(n, 0)));
    std::iota(all.begin(), all.end(), 0);
    std::vector<DelaySlot> slots;
    slots.push_back({0.0, false, all});
    for (double tau : delays) slots.push_back({tau, true, all});
    return make_ndde(n, std::move(slots), l1, l2, exogenous, tau_max, InputLayout::full);
}

void validate(const NddeModel& model) {
    if (model.n < 1) throw ParameterError("ndde: state dimension must be positive");
    if (!(model.tau_max > 0.0)) throw ParameterError("ndde: tau_max must be positive");
    if (model.slots.empty() && !model.has_exogenous) throw ParameterError("ndde: model has no inputs");
    for (const auto& s : model.slots) {
        if (s.channels.empty()) throw ParameterError("ndde: delay slot without channels");
        for (int c : s.channels)
            if (c < 0 || c >= model.n) throw ParameterError("ndde: channel index out of range");
        if (!(s.tau >= 0.0 && s.tau <= model.tau_max)) throw ParameterError("ndde: delay outside [0, tau_max]");
    }
    const int w = model.input_width();
    if (model.W1.cols() != w) throw DimensionError("ndde: W1 column count differs from the input width");
    if (model.b1.size() != model.W1.rows() || model.W2.cols() != model.W1.rows() || model.b2.size() != model.W2.rows() ||
        model.W3.cols() != model.W2.rows() || model.W3.rows() != model.n)
        throw DimensionError("ndde: inconsistent layer shapes");
}

ForwardCache forward(const NddeModel& model, const Vec& z0) {
    if (z0.size() != model.W1.cols()) throw DimensionError("ndde: input width mismatch");
    ForwardCache c;
    c.z0 = z0;
    c.z1 = (model.W1 * z0 + model.b1).array().tanh().matrix();
    c.z2 = (model.W2 * c.z1 + model.b2).array().tanh().matrix();
    c.out = model.W3 * c.z2;
    return c;
}

namespace {

// Accumulates weight gradients for one sample; returns dL/dz0.
Vec backprop(const NddeModel& model, const ForwardCache& c, const Vec& g_out, NddeGradient& g) {
    g.W3.noalias() += g_out * c.z2.transpose();
    const Vec g_a2 = ((model.W3.transpose() * g_out).array() * (1.0 - c.z2.array().square())).matrix();
    g.W2.noalias() += g_a2 * c.z1.transpose();
    g.b2 += g_a2;
    const Vec g_a1 = ((model.W2.transpose() * g_a2).array() * (1.0 - c.z1.array().square())).matrix();
    g.W1.noalias() += g_a1 * c.z0.transpose();
    g.b1 += g_a1;
    return model.W1.transpose() * g_a1;
}

}  // namespace

NddeSeries make_series(const Trajectory& traj) {
    validate(traj);
    if (traj.size() < 2) throw ParameterError("ndde: need at least two samples");
    const double dt = traj.times[1] - traj.times[0];
    if (!(dt > 0.0)) throw ParameterError("ndde: non-increasing sample times");
    const double tol = kGridTol * std::max(1.0, std::abs(traj.times.back()));
    for (std::size_t i = 1; i < traj.size(); ++i)
        if (std::abs(traj.times[i] - traj.times[i - 1] - dt) > 1e-6 * dt + tol)
            throw UnsupportedError("ndde: samples must lie on a uniform grid");
    // Keep the longest run of history rows continuing the grid backwards.
    std::size_t h = traj.history_times.size();
    std::size_t keep = 0;
    double expect = traj.times.front();
    for (std::size_t k = h; k-- > 0;) {
        expect -= dt;
        if (std::abs(traj.history_times[k] - expect) > 1e-6 * dt + tol) break;
        ++keep;
    }
    NddeSeries s;
    s.dt = dt;
    s.first = keep;
    s.t0 = traj.times.front() - dt * static_cast<double>(keep);
    const auto rows = idx(keep + traj.size());
    s.states.resize(rows, traj.dim());
    if (keep > 0) s.states.topRows(idx(keep)) = traj.history_states.bottomRows(idx(keep));
    s.states.bottomRows(idx(traj.size())) = traj.states;
    if (traj.derivs) {
        Mat d = Mat::Constant(rows, traj.dim(), std::numeric_limits<double>::quiet_NaN());
        d.bottomRows(idx(traj.size())) = *traj.derivs;
        s.derivs = std::move(d);
    }
    if (traj.input) {
        Vec u = Vec::Constant(rows, std::numeric_limits<double>::quiet_NaN());
        u.tail(idx(traj.size())) = *traj.input;
        s.input = std::move(u);
    }
    return s;
}

DelayRead delay_read(const NddeSeries& series, std::size_t row, double tau) {
    if (!(tau >= 0.0)) throw DomainError("ndde: negative delay");
    const double q = tau / series.dt;
    double cells = std::floor(q);
    double alpha = q - cells;
    if (alpha > 1.0 - 1e-12) {
        cells += 1.0;
        alpha = 0.0;
    } else if (alpha < 1e-12) {
        alpha = 0.0;
    }
    const auto i = static_cast<std::size_t>(cells);
    if (i > row || (alpha > 0.0 && i + 1 > row) || row >= series.size())
        throw DomainError("ndde: delayed read before the start of the data");
    return {row - i, alpha};
}

Vec assemble_input(const NddeModel& model, const NddeSeries& series, std::size_t row) {
    Vec z(model.input_width());
    Eigen::Index k = 0;
    for (const auto& slot : model.slots) {
        const DelayRead r = delay_read(series, row, slot.tau);
        for (int c : slot.channels) {
            double v = series.states(idx(r.lo), c);
            if (r.alpha > 0.0) v = (1.0 - r.alpha) * v + r.alpha * series.states(idx(r.lo - 1), c);
            z[k++] = v;
        }
    }
    if (model.has_exogenous) {
        if (!series.input) throw ParameterError("ndde: forced model needs recorded input");
        z[k] = (*series.input)[idx(row)];
    }
    return z;
}

Vec assemble_input(const NddeModel& model, const Trajectory& traj, double t) {
    const NddeSeries s = make_series(traj);
    const double q = (t - s.t0) / s.dt;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-6 || r < 0.0 || r >= static_cast<double>(s.size()))
        throw DomainError("ndde: time is not a sample instant");
    return assemble_input(model, s, static_cast<std::size_t>(r));
}

NddeGradient NddeGradient::zeros_like(const NddeModel& model) {
    NddeGradient g;
    g.W1 = Mat::Zero(model.W1.rows(), model.W1.cols());
    g.W2 = Mat::Zero(model.W2.rows(), model.W2.cols());
    g.W3 = Mat::Zero(model.W3.rows(), model.W3.cols());
    g.b1 = Vec::Zero(model.b1.size());
    g.b2 = Vec::Zero(model.b2.size());
    g.tau = Vec::Zero(idx(model.slots.size()));
    return g;
}

NddeGradient& NddeGradient::operator+=(const NddeGradient& o) {
    W1 += o.W1;
    W2 += o.W2;
    W3 += o.W3;
    b1 += o.b1;
    b2 += o.b2;
    tau += o.tau;
    return *this;
}

LossResult derivative_loss(const NddeModel& model, const std::vector<NddeSeries>& data,
                           const std::vector<BatchItem>& batch, bool inverse_time_weights) {
    LossResult res;
    res.grad = NddeGradient::zeros_like(model);
    std::vector<const BatchItem*> used;
    for (const auto& b : batch) {
        if (b.series >= data.size()) throw ParameterError("ndde: batch refers to a missing series");
        const NddeSeries& s = data[b.series];
        if (!s.derivs) throw ParameterError("ndde: derivative loss needs derivative data");
        if (s.time(b.row) > 0.0) used.push_back(&b);
    }
    if (used.empty()) return res;
    const double scale = 1.0 / (static_cast<double>(model.n) * static_cast<double>(used.size()));
    for (const BatchItem* b : used) {
        const NddeSeries& s = data[b->series];
        const double w = inverse_time_weights ? 1.0 / s.time(b->row) : 1.0;
        const ForwardCache c = forward(model, assemble_input(model, s, b->row));
        const Vec err = c.out - s.derivs->row(idx(b->row)).transpose();
        res.loss += scale * w * err.squaredNorm();
        const Vec g_z0 = backprop(model, c, 2.0 * scale * w * err, res.grad);
        // d x(t - tau) / d tau is minus the slope of the cell the read falls in.
        Eigen::Index k = 0;
        for (std::size_t r = 0; r < model.slots.size(); ++r) {
            const DelaySlot& slot = model.slots[r];
            const DelayRead rd = delay_read(s, b->row, slot.tau);
            for (int ch : slot.channels) {
                if (slot.trainable && rd.lo >= 1) {
                    const double slope = (s.states(idx(rd.lo), ch) - s.states(idx(rd.lo - 1), ch)) / s.dt;
                    res.grad.tau[idx(r)] -= g_z0[k] * slope;
                }
                ++k;
            }
        }
    }
    return res;
}

LossResult simulation_loss(const NddeModel& model, const std::vector<NddeSeries>& data,
                           const std::vector<BatchItem>& batch, int H, int substeps) {
    if (H < 1) throw ParameterError("ndde: simulation horizon must be at least 1");
    if (substeps < 1) throw ParameterError("ndde: substeps must be at least 1");
    LossResult res;
    res.grad = NddeGradient::zeros_like(model);
    if (batch.empty()) return res;
    const int n = model.n;
    const double scale =
        1.0 / (static_cast<double>(n) * static_cast<double>(H) * static_cast<double>(batch.size()));
    const auto S = static_cast<std::size_t>(substeps);
    const std::size_t steps = static_cast<std::size_t>(H) * S;

    struct Read {
        std::size_t lo;
        double alpha;
    };
    std::vector<ForwardCache> caches(steps);
    std::vector<std::vector<Read>> reads(steps, std::vector<Read>(model.slots.size()));
    // Fine grid of spacing dt / S; row j of sim/adj is fine row start * S + j.
    Mat sim(static_cast<Eigen::Index>(steps) + 1, n);
    Mat adj(static_cast<Eigen::Index>(steps) + 1, n);

    for (const auto& b : batch) {
        if (b.series >= data.size()) throw ParameterError("ndde: batch refers to a missing series");
        const NddeSeries& s = data[b.series];
        const std::size_t start = b.row;
        if (start + static_cast<std::size_t>(H) >= s.size()) throw DomainError("ndde: simulation horizon runs past the data");
        const double h = s.dt / static_cast<double>(S);
        const std::size_t start_f = start * S;
        // Data between samples is the linear interpolant, so refining the grid
        // leaves every delayed read of recorded data unchanged.
        auto value = [&](std::size_t f, int ch) {
            if (f > start_f) return sim(idx(f - start_f), ch);
            const std::size_t c = f / S, r = f % S;
            if (r == 0) return s.states(idx(c), ch);
            const double w = static_cast<double>(r) / static_cast<double>(S);
            return (1.0 - w) * s.states(idx(c), ch) + w * s.states(idx(c + 1), ch);
        };
        auto input_at = [&](std::size_t f) {
            const std::size_t c = f / S, r = f % S;
            if (r == 0) return (*s.input)[idx(c)];
            const double w = static_cast<double>(r) / static_cast<double>(S);
            return (1.0 - w) * (*s.input)[idx(c)] + w * (*s.input)[idx(c + 1)];
        };
        if (model.has_exogenous && !s.input) throw ParameterError("ndde: forced model needs recorded input");

        sim.row(0) = s.states.row(idx(start));
        for (std::size_t j = 0; j < steps; ++j) {
            const std::size_t row = start_f + j;
            Vec z(model.input_width());
            Eigen::Index k = 0;
            for (std::size_t r = 0; r < model.slots.size(); ++r) {
                const double q = model.slots[r].tau / h;
                double cells = std::floor(q);
                double alpha = q - cells;
                if (alpha > 1.0 - 1e-12) {
                    cells += 1.0;
                    alpha = 0.0;
                } else if (alpha < 1e-12) {
                    alpha = 0.0;
                }
                const auto i = static_cast<std::size_t>(cells);
                if (i + 1 > row) throw DomainError("ndde: delayed read before the start of the data");
                reads[j][r] = {row - i, alpha};
                for (int ch : model.slots[r].channels) {
                    double v = value(row - i, ch);
                    if (alpha > 0.0) v = (1.0 - alpha) * v + alpha * value(row - i - 1, ch);
                    z[k++] = v;
                }
            }
            if (model.has_exogenous) z[k] = input_at(row);
            caches[j] = forward(model, z);
            sim.row(idx(j + 1)) = sim.row(idx(j)) + h * caches[j].out.transpose();
        }

        adj.setZero();
        for (std::size_t i = 1; i <= static_cast<std::size_t>(H); ++i) {
            const auto e = (sim.row(idx(i * S)) - s.states.row(idx(start + i))).eval();
            res.loss += scale * e.squaredNorm();
            adj.row(idx(i * S)) = 2.0 * scale * e;
        }

        // Step j reads states at fine rows <= start_f + j, so walking the steps
        // backwards completes each adjoint before it is propagated.
        for (std::size_t j = steps; j-- > 0;) {
            adj.row(idx(j)) += adj.row(idx(j + 1));
            const Vec g_z0 = backprop(model, caches[j], h * adj.row(idx(j + 1)).transpose(), res.grad);
            Eigen::Index k = 0;
            for (std::size_t r = 0; r < model.slots.size(); ++r) {
                const DelaySlot& slot = model.slots[r];
                const Read rd = reads[j][r];
                for (int ch : slot.channels) {
                    const double g = g_z0[k++];
                    if (rd.lo > start_f) adj(idx(rd.lo - start_f), ch) += (1.0 - rd.alpha) * g;
                    if (rd.alpha > 0.0 && rd.lo - 1 > start_f) adj(idx(rd.lo - 1 - start_f), ch) += rd.alpha * g;
                    if (slot.trainable) res.grad.tau[idx(r)] -= g * (value(rd.lo, ch) - value(rd.lo - 1, ch)) / h;
                }
            }
        }
    }
    return res;
}

std::vector<BatchItem> eligible_rows(const NddeModel& model, const std::vector<NddeSeries>& data, bool derivative,
                                     int H) {
    std::vector<BatchItem> out;
    for (std::size_t si = 0; si < data.size(); ++si) {
        const NddeSeries& s = data[si];
        const auto reach = static_cast<std::size_t>(std::floor(model.tau_max / s.dt + 1e-12)) + 1;
        std::size_t lo = std::max(s.first, reach);
        std::size_t hi = s.size();
        if (!derivative) {
            const auto hs = static_cast<std::size_t>(std::max(H, 1));
            hi = s.size() > hs ? s.size() - hs : 0;
        }
        for (std::size_t r = lo; r < hi; ++r) {
            if (derivative && !(s.time(r) > 0.0)) continue;
            out.push_back({si, r});
        }
    }
    return out;
}

void validate(const TrainConfig& cfg) {
    if (cfg.loss == LossKind::simulation && cfg.horizon < 1) throw ParameterError("train: horizon must be >= 1");
    if (cfg.substeps < 1) throw ParameterError("train: substeps must be >= 1");
    if (!(cfg.eta > 0.0) || !(cfg.eta_tau > 0.0)) throw ParameterError("train: learning rates must be positive");
    if (cfg.batch < 1) throw ParameterError("train: batch must be positive");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw ParameterError("train: ADAM betas must lie in [0, 1)");
    if (!(cfg.eps_adam > 0.0)) throw ParameterError("train: ADAM epsilon must be positive");
}

namespace {

template <class M>
void append(std::vector<double>& v, const M& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
}

template <class M>
std::size_t extract(const std::vector<double>& v, std::size_t at, M& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[at++];
    return at;
}

std::vector<double> flatten(const Mat& W1, const Vec& b1, const Mat& W2, const Vec& b2, const Mat& W3) {
    std::vector<double> v;
    append(v, W1);
    append(v, b1);
    append(v, W2);
    append(v, b2);
    append(v, W3);
    return v;
}

double model_norm(const NddeModel& m) {
    return std::sqrt(m.W1.squaredNorm() + m.W2.squaredNorm() + m.W3.squaredNorm() + m.b1.squaredNorm() +
                     m.b2.squaredNorm());
}

}  // namespace

void adam_step(NddeModel& model, const NddeGradient& grad, AdamState& state, const TrainConfig& cfg) {
    std::vector<double> p = flatten(model.W1, model.b1, model.W2, model.b2, model.W3);
    std::vector<double> g = flatten(grad.W1, grad.b1, grad.W2, grad.b2, grad.W3);
    const std::size_t nw = p.size();
    for (std::size_t r = 0; r < model.slots.size(); ++r) {
        p.push_back(model.slots[r].tau);
        g.push_back(model.slots[r].trainable ? grad.tau[idx(r)] : 0.0);
    }
    const auto total = idx(p.size());
    if (state.m.size() != total) {
        state.m = Vec::Zero(total);
        state.v = Vec::Zero(total);
        state.step = 0;
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto ii = idx(i);
        state.m[ii] = cfg.beta1 * state.m[ii] + (1.0 - cfg.beta1) * g[i];
        state.v[ii] = cfg.beta2 * state.v[ii] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mh = state.m[ii] / c1;
        const double vh = state.v[ii] / c2;
        const double eta = i < nw ? cfg.eta : cfg.eta_tau;
        p[i] -= eta * mh / (std::sqrt(vh) + cfg.eps_adam);
    }
    std::size_t at = 0;
    at = extract(p, at, model.W1);
    at = extract(p, at, model.b1);
    at = extract(p, at, model.W2);
    at = extract(p, at, model.b2);
    at = extract(p, at, model.W3);
    for (auto& slot : model.slots) {
        if (slot.trainable) slot.tau = std::clamp(p[at], 0.0, model.tau_max);
        ++at;
    }
}

void glorot_init(NddeModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Mat& W) {
        const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = dist(rng);
    };
    fill(model.W1);
    fill(model.W2);
    fill(model.W3);
    model.b1.setZero();
    model.b2.setZero();
}

TrainRecord train(NddeModel model, const std::vector<NddeSeries>& data, const TrainConfig& cfg) {
    validate(cfg);
    validate(model);
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(cfg.seed);
    if (!cfg.keep_weights) glorot_init(model, cfg.seed);
    std::size_t trainable = 0;
    for (const auto& s : model.slots) trainable += s.trainable ? 1 : 0;
    if (cfg.delay_init) {
        if (cfg.delay_init->size() != trainable) throw ParameterError("train: delay_init size differs from the trainable delays");
        std::size_t k = 0;
        for (auto& s : model.slots)
            if (s.trainable) s.tau = std::clamp((*cfg.delay_init)[k++], 0.0, model.tau_max);
    } else if (!cfg.keep_weights) {
        std::uniform_real_distribution<double> dist(0.0, model.tau_max);
        for (auto& s : model.slots)
            if (s.trainable) s.tau = dist(rng);
    }

    const bool deriv = cfg.loss == LossKind::derivative;
    std::vector<BatchItem> pool = eligible_rows(model, data, deriv, cfg.horizon);
    if (pool.empty()) throw ParameterError("train: no sample satisfies the delay and horizon ranges");
    const std::size_t N = std::min(cfg.batch, pool.size());

    TrainRecord rec;
    rec.best = model;
    double best = std::numeric_limits<double>::infinity();
    AdamState adam;
    std::vector<BatchItem> batch(N);
    for (std::size_t q = 0; q < cfg.iters; ++q) {
        // Partial Fisher-Yates: the first N entries of pool become the batch.
        for (std::size_t i = 0; i < N; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
            batch[i] = pool[i];
        }
        const LossResult lr = deriv ? derivative_loss(model, data, batch, cfg.inverse_time_weights)
                                    : simulation_loss(model, data, batch, cfg.horizon, cfg.substeps);
        const double gnorm = std::sqrt(lr.grad.W1.squaredNorm() + lr.grad.W2.squaredNorm() +
                                       lr.grad.W3.squaredNorm() + lr.grad.b1.squaredNorm() +
                                       lr.grad.b2.squaredNorm() + lr.grad.tau.squaredNorm());
        if (!std::isfinite(lr.loss) || !std::isfinite(gnorm)) {
            std::ostringstream msg;
            msg << "train: non-finite loss at iteration " << q << " (weight norm " << format_double(model_norm(model))
                << ", gradient norm " << format_double(gnorm) << ")";
            throw TrainingError(msg.str());
        }
        rec.loss.push_back(lr.loss);
        rec.delays.push_back(model.delays());
        if (lr.loss < best) {
            best = lr.loss;
            rec.best = model;
            rec.best_iter = q;
        }
        adam_step(model, lr.grad, adam, cfg);
    }
    if (cfg.iters == 0) rec.best = model;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

DdeSystem as_dde(const NddeModel& model, std::function<double(double)> input, double min_delay) {
    validate(model);
    if (model.has_exogenous && !input) throw ParameterError("ndde: forced model needs an input function");
    std::vector<double> uniq;
    for (const auto& s : model.slots)
        if (s.tau >= min_delay) uniq.push_back(s.tau);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    // -1 marks slots that read the current state.
    std::vector<int> map;
    for (const auto& s : model.slots)
        map.push_back(s.tau >= min_delay
                          ? static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), s.tau) - uniq.begin())
                          : -1);
    DdeSystem sys;
    sys.n = model.n;
    sys.delays = uniq;
    sys.label = "ndde";
    sys.input = std::move(input);
    const auto net = std::make_shared<const NddeModel>(model);
    sys.rhs = [net, map](double, const Vec& x, const std::vector<Vec>& delayed, double u) {
        Vec z(net->input_width());
        Eigen::Index k = 0;
        for (std::size_t r = 0; r < net->slots.size(); ++r) {
            const Vec& src = map[r] < 0 ? x : delayed[static_cast<std::size_t>(map[r])];
            for (int ch : net->slots[r].channels) z[k++] = src[ch];
        }
        if (net->has_exogenous) z[k] = u;
        return forward(*net, z).out;
    };
    return sys;
}

DenseSolution simulate_ndde(const NddeModel& model, const HistorySpec& history, double t0, double t_end,
                            std::function<double(double)> input, const ReplayConfig& cfg) {
    const DdeSystem sys = as_dde(model, std::move(input), cfg.step);
    if (history.span() < sys.max_delay() - 1e-12) throw DomainError("ndde: history shorter than the largest delay");
    SolveConfig sc;
    sc.step = cfg.step;
    sc.t0 = t0;
    sc.t_end = t_end;
    return solve_dde(sys, history, sc);
}

std::function<double(double)> input_interpolant(std::vector<double> times, std::vector<double> values) {
    if (times.size() != values.size() || times.empty()) throw DimensionError("input samples: size mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ParameterError("input samples: times must be ascending");
    return [t = std::move(times), v = std::move(values)](double s) {
        if (s <= t.front()) return v.front();
        if (s >= t.back()) return v.back();
        const auto k = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), s) - t.begin());
        const double a = (s - t[k - 1]) / (t[k] - t[k - 1]);
        return (1.0 - a) * v[k - 1] + a * v[k];
    };
}

NddeReport evaluate_ndde(const NddeModel& model, const Trajectory& train, const Trajectory& test,
                         const ReplayConfig& cfg) {
    NddeReport rep;
    std::function<double(double)> input;
    if (model.has_exogenous) {
        if (!train.input || !test.input) throw ParameterError("ndde: forced model needs recorded input");
        std::vector<double> t = train.times, u(train.input->data(), train.input->data() + train.input->size());
        t.insert(t.end(), test.times.begin(), test.times.end());
        u.insert(u.end(), test.input->data(), test.input->data() + test.input->size());
        input = input_interpolant(std::move(t), std::move(u));
    }
    if (test.derivs) {
        const NddeSeries s = make_series(test);
        Mat pred(test.states.rows(), test.states.cols());
        for (std::size_t i = 0; i < test.size(); ++i)
            pred.row(idx(i)) = forward(model, assemble_input(model, s, s.first + i)).out.transpose();
        rep.rmse_deriv_test = rmse(pred, *test.derivs);
    }
    double reach = 0.0;
    for (const auto& s : model.slots) reach = std::max(reach, s.tau);
    try {
        const auto [hist, t0] = replay_history(test, std::max(reach, 1e-9), false);
        const DenseSolution sim = simulate_ndde(model, hist, t0, test.times.back(), input, cfg);
        Mat pred(test.states.rows(), test.states.cols());
        for (std::size_t i = 0; i < test.size(); ++i) pred.row(idx(i)) = sim.value(test.times[i]).transpose();
        rep.rmse_traj_test = rmse(pred, test.states);
    } catch (const DivergenceError& e) {
        rep.rmse_traj_test = std::numeric_limits<double>::infinity();
        rep.flags.push_back(std::string("replay diverged: ") + e.what());
    }
    return rep;
}

void write_checkpoint(std::ostream& os, const NddeModel& model) {
    validate(model);
    os << "ndde-checkpoint 1\n";
    os << "n " << model.n << '\n';
    os << "layout " << (model.layout == InputLayout::full ? "full" : "simplified") << '\n';
    os << "exogenous " << (model.has_exogenous ? 1 : 0) << '\n';
    os << "tau_max " << format_double(model.tau_max) << '\n';
    os << "slots " << model.slots.size() << '\n';
    for (const auto& s : model.slots) {
        os << "slot " << format_double(s.tau) << ' ' << (s.trainable ? 1 : 0) << ' ' << s.channels.size();
        for (int c : s.channels) os << ' ' << c;
        os << '\n';
    }
    auto mat = [&os](const char* name, const Mat& m) {
        os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_double(m(i, j));
            os << '\n';
        }
    };
    mat("W1", model.W1);
    mat("b1", model.b1);
    mat("W2", model.W2);
    mat("b2", model.b2);
    mat("W3", model.W3);
}

NddeModel read_checkpoint(std::istream& is) {
    auto fail = [](const std::string& what) -> void { throw ParameterError("checkpoint: " + what); };
    std::string key, word;
    int version = 0;
    if (!(is >> key >> version) || key != "ndde-checkpoint") fail("missing header");
    if (version != 1) fail("unsupported version " + std::to_string(version));
    auto expect = [&](const char* name) {
        if (!(is >> key) || key != name) fail(std::string("expected '") + name + "'");
    };
    auto number = [&]() {
        if (!(is >> word)) fail("truncated file");
        return parse_double(word);
    };
    NddeModel m;
    expect("n");
    m.n = static_cast<int>(number());
    expect("layout");
    is >> word;
    if (word == "full") m.layout = InputLayout::full;
    else if (word == "simplified") m.layout = InputLayout::simplified;
    else fail("unknown layout '" + word + "'");
    expect("exogenous");
    m.has_exogenous = number() != 0.0;
    expect("tau_max");
    m.tau_max = number();
    expect("slots");
    const auto ns = static_cast<std::size_t>(number());
    for (std::size_t i = 0; i < ns; ++i) {
        expect("slot");
        DelaySlot s;
        s.tau = number();
        s.trainable = number() != 0.0;
        const auto nc = static_cast<std::size_t>(number());
        for (std::size_t c = 0; c < nc; ++c) s.channels.push_back(static_cast<int>(number()));
        m.slots.push_back(std::move(s));
    }
    auto mat = [&](const char* name, auto& out) {
        expect(name);
        const auto r = static_cast<Eigen::Index>(number());
        const auto c = static_cast<Eigen::Index>(number());
        if (r < 0 || c < 0) fail("negative matrix size");
        Mat tmp(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) tmp(i, j) = number();
        if constexpr (std::is_same_v<std::decay_t<decltype(out)>, Vec>) {
            if (c != 1) fail(std::string(name) + " must be a column");
            out = tmp.col(0);
        } else {
            out = tmp;
        }
    };
    mat("W1", m.W1);
    mat("b1", m.b1);
    mat("W2", m.W2);
    mat("b2", m.b2);
    mat("W3", m.W3);
    validate(m);
    return m;
}

void write_train_record_csv(std::ostream& os, const TrainRecord& rec) {
    const std::size_t k = rec.delays.empty() ? rec.best.delays().size() : rec.delays.front().size();
    os << "iter,loss";
    for (std::size_t j = 0; j < k; ++j) os << ",tau_" << j;
    os << '\n';
    for (std::size_t q = 0; q < rec.loss.size(); ++q) {
        os << q << ',' << format_double(rec.loss[q]);
        for (double tau : rec.delays[q]) os << ',' << format_double(tau);
        os << '\n';
    }
}

}  // namespace delayid
