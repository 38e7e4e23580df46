#pragma once

// Central finite-difference checks of the NDDE loss gradients, shared by the
// unit tests and the acceptance runner.

#include "delayid/ndde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace delayid::testing {

inline std::vector<double*> parameter_refs(NddeModel& m) {
    std::vector<double*> out;
    for (Mat* W : {&m.W1, &m.W2, &m.W3})
        for (Eigen::Index i = 0; i < W->size(); ++i) out.push_back(W->data() + i);
    for (Vec* b : {&m.b1, &m.b2})
        for (Eigen::Index i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
    for (auto& s : m.slots)
        if (s.trainable) out.push_back(&s.tau);
    return out;
}

inline std::vector<double> gradient_entries(const NddeModel& m, const NddeGradient& g) {
    std::vector<double> out;
    for (const Mat* W : {&g.W1, &g.W2, &g.W3})
        for (Eigen::Index i = 0; i < W->size(); ++i) out.push_back(W->data()[i]);
    for (const Vec* b : {&g.b1, &g.b2})
        for (Eigen::Index i = 0; i < b->size(); ++i) out.push_back(b->data()[i]);
    for (std::size_t r = 0; r < m.slots.size(); ++r)
        if (m.slots[r].trainable) out.push_back(g.tau[static_cast<Eigen::Index>(r)]);
    return out;
}

/// ||g - g_fd|| / max(||g||, ||g_fd||, tiny).
inline double gradient_rel_error(const NddeModel& model, const std::function<LossResult(const NddeModel&)>& loss,
                                 double h = 1e-6) {
    const std::vector<double> analytic = gradient_entries(model, loss(model).grad);
    NddeModel probe = model;
    auto refs = parameter_refs(probe);
    std::vector<double> fd(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const double v = *refs[i];
        *refs[i] = v + h;
        const double up = loss(probe).loss;
        *refs[i] = v - h;
        const double down = loss(probe).loss;
        *refs[i] = v;
        fd[i] = (up - down) / (2.0 * h);
    }
    double num = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
        na += analytic[i] * analytic[i];
        nf += fd[i] * fd[i];
    }
    return std::sqrt(num) / std::max({std::sqrt(na), std::sqrt(nf), 1e-300});
}

/// A small model with random weights and delays kept away from multiples of dt
/// (the interpolated read has kinks there) plus smooth data to train on.
struct TinyProblem {
    NddeModel model;
    std::vector<NddeSeries> data;
};

inline TinyProblem random_tiny_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_n(1, 2), pick_h(2, 4), pick_k(1, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = pick_n(rng), hidden = pick_h(rng), k = pick_k(rng);
    const double dt = 0.1, tau_max = 0.6;
    std::vector<double> delays;
    for (int i = 0; i < k; ++i) {
        const int cell = std::uniform_int_distribution<int>(1, 5)(rng);
        delays.push_back(dt * (cell + 0.2 + 0.6 * std::uniform_real_distribution<double>(0.0, 1.0)(rng)));
    }
    TinyProblem p;
    p.model = make_ndde_full(n, delays, hidden, hidden, tau_max);
    glorot_init(p.model, seed + 17);
    for (Vec* b : {&p.model.b1, &p.model.b2})
        for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = 0.3 * u(rng);

    NddeSeries s;
    s.t0 = -1.0;
    s.dt = dt;
    const int rows = 40;
    s.states.resize(rows, n);
    s.derivs = Mat(rows, n);
    std::vector<double> freq(static_cast<std::size_t>(n)), phase(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        freq[static_cast<std::size_t>(j)] = 1.0 + 0.5 * u(rng);
        phase[static_cast<std::size_t>(j)] = 3.0 * u(rng);
    }
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < n; ++j) {
            const double t = s.time(static_cast<std::size_t>(i));
            const double w = freq[static_cast<std::size_t>(j)], ph = phase[static_cast<std::size_t>(j)];
            s.states(i, j) = std::sin(w * t + ph);
            (*s.derivs)(i, j) = w * std::cos(w * t + ph) + 0.1 * u(rng);
        }
    s.first = 10;
    p.data.push_back(std::move(s));
    return p;
}

}  // namespace delayid::testing
