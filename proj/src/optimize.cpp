#include "delayid/optimize.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <mutex>
#include <thread>

namespace delayid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

void record(OptResult& res, const Vec& p, double v, bool fallback = false) {
    v = sanitize(v);
    res.trace.push_back({p, v, fallback});
    ++res.calls;
    if (res.trace.size() == 1 || v < res.best_value) {
        res.best_value = v;
        res.best_point = p;
    }
}

Vec clamp_to(const SearchSpace& space, Vec p) {
    for (std::size_t d = 0; d < space.dimension(); ++d)
        p[static_cast<Eigen::Index>(d)] = std::clamp(p[static_cast<Eigen::Index>(d)], space.dims[d].lower, space.dims[d].upper);
    return p;
}

}  // namespace

void validate(const SearchSpace& space) {
    if (space.dims.empty()) throw ParameterError("search space has no dimensions");
    for (const auto& d : space.dims)
        if (!(d.lower < d.upper) || !std::isfinite(d.lower) || !std::isfinite(d.upper))
            throw ParameterError("search dimension '" + d.name + "' needs finite lower < upper");
    if (!space.objective) throw ParameterError("search space has no objective");
}

std::vector<double> evaluate_batch(const Objective& f, const std::vector<Vec>& points, int threads) {
    std::vector<double> out(points.size());
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || points.size() < 2) {
        for (std::size_t i = 0; i < points.size(); ++i) out[i] = f(points[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            try {
                out[i] = f(points[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, points.size()); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

OptResult brute_force(const SearchSpace& space, const std::vector<int>& counts, int threads) {
    validate(space);
    if (counts.size() != space.dimension()) throw DimensionError("grid counts must match the search dimension");
    std::size_t total = 1;
    for (int c : counts) {
        if (c < 1) throw ParameterError("grid counts must be >= 1");
        total *= static_cast<std::size_t>(c);
    }
    const auto D = static_cast<Eigen::Index>(space.dimension());
    std::vector<Vec> points;
    points.reserve(total);
    std::vector<int> idx(space.dimension(), 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vec p(D);
        for (Eigen::Index d = 0; d < D; ++d) {
            const auto& dim = space.dims[static_cast<std::size_t>(d)];
            const int c = counts[static_cast<std::size_t>(d)];
            const int i = idx[static_cast<std::size_t>(d)];
            p[d] = c == 1 ? 0.5 * (dim.lower + dim.upper)
                          : (i == c - 1 ? dim.upper : dim.lower + (dim.upper - dim.lower) * i / (c - 1));
        }
        points.push_back(std::move(p));
        for (Eigen::Index d = D - 1; d >= 0; --d) {
            if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    const std::vector<double> values = evaluate_batch(space.objective, points, threads);
    OptResult res;
    for (std::size_t k = 0; k < total; ++k) record(res, points[k], values[k]);
    return res;
}

OptResult particle_swarm(const SearchSpace& space, const PsoConfig& cfg) {
    validate(space);
    if (cfg.swarm_size < 1 || cfg.max_iters < 0 || cfg.stall_window < 1)
        throw ParameterError("invalid particle swarm configuration");
    const auto D = static_cast<Eigen::Index>(space.dimension());
    const auto S = static_cast<std::size_t>(cfg.swarm_size);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec lo(D), hi(D);
    for (Eigen::Index d = 0; d < D; ++d) {
        lo[d] = space.dims[static_cast<std::size_t>(d)].lower;
        hi[d] = space.dims[static_cast<std::size_t>(d)].upper;
    }
    const Vec vmax = 0.5 * (hi - lo);

    std::vector<Vec> x(S), v(S), pbest(S);
    std::vector<double> pval(S);
    for (std::size_t i = 0; i < S; ++i) {
        x[i].resize(D);
        v[i].resize(D);
        for (Eigen::Index d = 0; d < D; ++d) {
            x[i][d] = lo[d] + unit(rng) * (hi[d] - lo[d]);
            v[i][d] = (2.0 * unit(rng) - 1.0) * vmax[d];
        }
    }
    OptResult res;
    auto evaluate_swarm = [&] {
        const std::vector<double> vals = evaluate_batch(space.objective, x, cfg.threads);
        for (std::size_t i = 0; i < S; ++i) record(res, x[i], vals[i]);
        return vals;
    };
    std::vector<double> vals = evaluate_swarm();
    for (std::size_t i = 0; i < S; ++i) {
        pbest[i] = x[i];
        pval[i] = sanitize(vals[i]);
    }
    std::vector<double> best_history{res.best_value};
    for (int it = 1; it <= cfg.max_iters; ++it) {
        const Vec g = res.best_point;
        for (std::size_t i = 0; i < S; ++i) {
            for (Eigen::Index d = 0; d < D; ++d) {
                const double r1 = unit(rng), r2 = unit(rng);
                double vd = cfg.inertia * v[i][d] + cfg.cognitive * r1 * (pbest[i][d] - x[i][d]) +
                            cfg.social * r2 * (g[d] - x[i][d]);
                vd = std::clamp(vd, -vmax[d], vmax[d]);
                double xd = x[i][d] + vd;
                if (xd < lo[d]) {
                    xd = lo[d];
                    vd = 0.0;
                } else if (xd > hi[d]) {
                    xd = hi[d];
                    vd = 0.0;
                }
                v[i][d] = vd;
                x[i][d] = xd;
            }
        }
        vals = evaluate_swarm();
        for (std::size_t i = 0; i < S; ++i) {
            const double fv = sanitize(vals[i]);
            if (fv < pval[i]) {
                pval[i] = fv;
                pbest[i] = x[i];
            }
        }
        best_history.push_back(res.best_value);
        if (it >= cfg.stall_window) {
            const double before = best_history[best_history.size() - 1 - static_cast<std::size_t>(cfg.stall_window)];
            const double now = res.best_value;
            const double gain = std::isfinite(before) ? before - now : kInf;
            if (std::isfinite(now) && gain < cfg.stall_tol * std::max(1.0, std::abs(now))) break;
        }
    }
    return res;
}

namespace {

double se_kernel(const Vec& a, const Vec& b, double ell) { return std::exp(-0.5 * (a - b).squaredNorm() / (ell * ell)); }

struct GpFit {
    Eigen::LLT<Mat> llt;
    Vec alpha;
    double ell = 0.0;
    bool ok = false;
};

GpFit fit_gp(const std::vector<Vec>& X, const Vec& y, double ell, double jitter) {
    const auto n = static_cast<Eigen::Index>(X.size());
    Mat K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = se_kernel(X[static_cast<std::size_t>(i)], X[static_cast<std::size_t>(j)], ell);
    K.diagonal().array() += jitter;
    GpFit g;
    g.ell = ell;
    g.llt.compute(K);
    if (g.llt.info() != Eigen::Success) return g;
    g.alpha = g.llt.solve(y);
    g.ok = g.alpha.allFinite();
    return g;
}

double log_marginal(const GpFit& g, const Vec& y) {
    const Mat& L = g.llt.matrixL();
    return -0.5 * y.dot(g.alpha) - L.diagonal().array().log().sum();
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

OptResult bayes_opt(const SearchSpace& space, const BoConfig& cfg) {
    validate(space);
    if (cfg.n_init < 1 || cfg.budget < cfg.n_init) throw ParameterError("bayes_opt needs 1 <= n_init <= budget");
    if (cfg.lengthscales.empty()) throw ParameterError("bayes_opt needs at least one candidate lengthscale");
    const auto D = static_cast<Eigen::Index>(space.dimension());
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto to_space = [&](const Vec& u) {
        Vec p(D);
        for (Eigen::Index d = 0; d < D; ++d) {
            const auto& dim = space.dims[static_cast<std::size_t>(d)];
            p[d] = dim.lower + u[d] * (dim.upper - dim.lower);
        }
        return clamp_to(space, p);
    };

    OptResult res;
    std::vector<Vec> U;  // unit-box inputs
    std::vector<double> raw;
    auto observe = [&](const Vec& u, bool fallback) {
        const Vec p = to_space(u);
        const double v = sanitize(space.objective(p));
        U.push_back(u);
        raw.push_back(v);
        record(res, p, v, fallback);
    };

    // Latin hypercube: one point per stratum in each dimension, strata shuffled independently.
    std::vector<std::vector<int>> perm(static_cast<std::size_t>(D));
    for (auto& pd : perm) {
        pd.resize(static_cast<std::size_t>(cfg.n_init));
        for (int i = 0; i < cfg.n_init; ++i) pd[static_cast<std::size_t>(i)] = i;
        std::shuffle(pd.begin(), pd.end(), rng);
    }
    for (int i = 0; i < cfg.n_init; ++i) {
        Vec u(D);
        for (Eigen::Index d = 0; d < D; ++d)
            u[d] = (perm[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)] + unit(rng)) / cfg.n_init;
        observe(u, false);
    }

    int fallbacks = 0;
    while (static_cast<int>(res.calls) < cfg.budget) {
        // Surrogate targets: log scale when possible, infinities capped at the worst finite value.
        double worst = -kInf;
        bool all_positive = true;
        for (double v : raw)
            if (std::isfinite(v)) {
                worst = std::max(worst, v);
                all_positive = all_positive && v > 0.0;
            }
        Vec y(static_cast<Eigen::Index>(raw.size()));
        for (std::size_t i = 0; i < raw.size(); ++i) {
            double v = std::isfinite(raw[i]) ? raw[i] : (std::isfinite(worst) ? worst : 0.0);
            y[static_cast<Eigen::Index>(i)] = all_positive && std::isfinite(worst) ? std::log(v) : v;
        }
        const double mean = y.mean();
        const double sd = std::sqrt((y.array() - mean).square().mean());
        Vec z = sd > 0.0 ? Vec((y.array() - mean) / sd) : Vec(y.array() - mean);

        GpFit best_fit;
        double best_lml = -kInf;
        for (double ell : cfg.lengthscales) {
            GpFit g = fit_gp(U, z, ell, cfg.jitter);
            if (!g.ok) continue;
            const double lml = log_marginal(g, z);
            if (std::isfinite(lml) && lml > best_lml) {
                best_lml = lml;
                best_fit = std::move(g);
            }
        }

        Vec next(D);
        bool fallback = true;
        if (best_fit.ok && sd > 0.0) {
            const double fbest = z.minCoeff();
            double best_ei = 0.0;
            for (int c = 0; c < cfg.candidates; ++c) {
                Vec u(D);
                for (Eigen::Index d = 0; d < D; ++d) u[d] = unit(rng);
                Vec k(static_cast<Eigen::Index>(U.size()));
                for (std::size_t i = 0; i < U.size(); ++i) k[static_cast<Eigen::Index>(i)] = se_kernel(u, U[i], best_fit.ell);
                const double mu = k.dot(best_fit.alpha);
                const double var = std::max(0.0, 1.0 + cfg.jitter - k.dot(best_fit.llt.solve(k)));
                const double s = std::sqrt(var);
                if (s <= 0.0) continue;
                const double gap = fbest - mu;
                const double zz = gap / s;
                const double ei = gap * normal_cdf(zz) + s * normal_pdf(zz);
                if (ei > best_ei) {
                    best_ei = ei;
                    next = u;
                    fallback = false;
                }
            }
        }
        if (fallback) {
            for (Eigen::Index d = 0; d < D; ++d) next[d] = unit(rng);
            ++fallbacks;
        }
        observe(next, fallback);
    }
    if (fallbacks > 0) res.flags.push_back(std::to_string(fallbacks) + " iterations fell back to random candidates");
    return res;
}

void write_trace_csv(std::ostream& os, const OptResult& result, const std::vector<SearchDim>& dims) {
    os << "call_index";
    for (const auto& d : dims) os << ',' << d.name;
    os << ",objective\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        os << (i + 1);
        for (Eigen::Index d = 0; d < result.trace[i].point.size(); ++d) os << ',' << format_double(result.trace[i].point[d]);
        os << ',' << format_double(result.trace[i].value) << '\n';
    }
}

}  // namespace delayid
