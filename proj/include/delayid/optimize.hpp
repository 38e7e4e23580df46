#pragma once

#include "delayid/models.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace delayid {

struct SearchDim {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
};

/// Objective values may be +inf (infeasible point); the objective must be safe
/// to call concurrently when threads > 1.
using Objective = std::function<double(const Vec&)>;

struct SearchSpace {
    std::vector<SearchDim> dims;
    Objective objective;

    std::size_t dimension() const { return dims.size(); }
};

void validate(const SearchSpace& space);

struct TraceEntry {
    Vec point;
    double value = 0.0;
    bool fallback = false;  // BO: point drawn at random instead of from the surrogate
};

struct OptResult {
    Vec best_point;
    double best_value = 0.0;
    std::vector<TraceEntry> trace;
    std::size_t calls = 0;
    std::vector<std::string> flags;
};

/// Full tensor grid, endpoints inclusive, row-major (last dimension fastest);
/// ties go to the first grid point in that order.
OptResult brute_force(const SearchSpace& space, const std::vector<int>& counts, int threads = 1);

struct PsoConfig {
    int swarm_size = 20;
    double inertia = 0.7298;
    double cognitive = 1.49618;
    double social = 1.49618;
    /// Stop once the best value improved by less than stall_tol * max(1, |best|)
    /// over the last stall_window iterations.
    double stall_tol = 1e-3;
    int stall_window = 20;
    int max_iters = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

OptResult particle_swarm(const SearchSpace& space, const PsoConfig& cfg = {});

struct BoConfig {
    int n_init = 10;
    int budget = 300;
    std::vector<double> lengthscales{0.05, 0.1, 0.2, 0.5, 1.0};
    int candidates = 1024;
    double jitter = 1e-8;
    std::uint64_t seed = 0;
};

/// GP-EI Bayesian optimization. The surrogate models log(objective) when all
/// observed values are positive (objective spans many decades), the raw value
/// otherwise; infinite observations are replaced by the worst finite one.
OptResult bayes_opt(const SearchSpace& space, const BoConfig& cfg = {});

/// Evaluates points in order; with threads > 1 evaluations run concurrently
/// but results keep the input order.
std::vector<double> evaluate_batch(const Objective& f, const std::vector<Vec>& points, int threads);

void write_trace_csv(std::ostream& os, const OptResult& result, const std::vector<SearchDim>& dims);

}  // namespace delayid
