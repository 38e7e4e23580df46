#include "delayid/collocation.hpp"

#include "delayid/data.hpp"
#include "delayid/errors.hpp"

#include <cmath>
#include <numbers>

namespace delayid {

CollocationScheme make_scheme(int M, double tau_bar) {
    if (M < 1) throw ParameterError("collocation degree M must be >= 1");
    if (!(tau_bar > 0.0) || !std::isfinite(tau_bar)) throw ParameterError("tau_bar must be positive");
    CollocationScheme sc;
    sc.M = M;
    sc.tau_bar = tau_bar;
    sc.nodes.resize(M + 1);
    sc.weights.resize(M + 1);
    for (int i = 0; i <= M; ++i) {
        sc.nodes[i] = 0.5 * tau_bar * (std::cos(i * std::numbers::pi / M) - 1.0);
        sc.weights[i] = ((i % 2) ? -1.0 : 1.0) * ((i == 0 || i == M) ? 0.5 : 1.0);
    }
    sc.nodes[0] = 0.0;
    sc.nodes[M] = -tau_bar;
    if (M % 2 == 0) sc.nodes[M / 2] = -0.5 * tau_bar;

    // Full (M+1)x(M+1) barycentric differentiation matrix, then keep rows 1..M.
    Mat full = Mat::Zero(M + 1, M + 1);
    for (int i = 0; i <= M; ++i) {
        double diag = 0.0;
        for (int j = 0; j <= M; ++j) {
            if (i == j) continue;
            const double v = (sc.weights[j] / sc.weights[i]) / (sc.nodes[i] - sc.nodes[j]);
            full(i, j) = v;
            diag -= v;
        }
        full(i, i) = diag;
    }
    sc.D = full.bottomRows(M);
    return sc;
}

Vec lagrange_row(const CollocationScheme& scheme, double s) {
    const double slack = 1e-12 * std::max(1.0, scheme.tau_bar);
    if (s > slack || s < -scheme.tau_bar - slack) throw DomainError("interpolation point outside [-tau_bar, 0]");
    const int M = scheme.M;
    Vec row = Vec::Zero(M + 1);
    for (int j = 0; j <= M; ++j) {
        if (s == scheme.nodes[j]) {
            row[j] = 1.0;
            return row;
        }
    }
    double denom = 0.0;
    for (int j = 0; j <= M; ++j) {
        row[j] = scheme.weights[j] / (s - scheme.nodes[j]);
        denom += row[j];
    }
    return row / denom;
}

Vec interpolate(const CollocationScheme& scheme, const Vec& U, int n, double s) {
    if (U.size() != static_cast<Eigen::Index>(n) * (scheme.M + 1)) throw DimensionError("collocated state length mismatch");
    const Vec l = lagrange_row(scheme, s);
    Vec out = Vec::Zero(n);
    for (int j = 0; j <= scheme.M; ++j)
        if (l[j] != 0.0) out += l[j] * node_block(U, n, j);
    return out;
}

Vec collocated_rhs(const CollocationScheme& scheme, const BlockRhs& f_block, const std::vector<double>& delays,
                   const Vec& U, int n) {
    if (U.size() != static_cast<Eigen::Index>(n) * (scheme.M + 1)) throw DimensionError("collocated state length mismatch");
    std::vector<Vec> delayed;
    delayed.reserve(delays.size());
    for (double tau : delays) {
        if (tau > scheme.tau_bar * (1.0 + 1e-12)) throw DomainError("delay exceeds tau_bar");
        delayed.push_back(interpolate(scheme, U, n, -std::min(tau, scheme.tau_bar)));
    }
    Vec dU(U.size());
    dU.head(n) = f_block(node_block(U, n, 0), delayed);
    for (int i = 1; i <= scheme.M; ++i) {
        Vec acc = Vec::Zero(n);
        for (int j = 0; j <= scheme.M; ++j) acc += scheme.D(i - 1, j) * node_block(U, n, j);
        dU.segment(static_cast<Eigen::Index>(i) * n, n) = acc;
    }
    return dU;
}

Vec restrict_history(const CollocationScheme& scheme, const HistorySpec& history) {
    if (history.span() < scheme.tau_bar * (1.0 - 1e-12)) throw DomainError("history span shorter than tau_bar");
    const int n = history.dim();
    Vec U(static_cast<Eigen::Index>(n) * (scheme.M + 1));
    for (int i = 0; i <= scheme.M; ++i) U.segment(static_cast<Eigen::Index>(i) * n, n) = history.value(scheme.nodes[i]);
    return U;
}

OdeRhs collocated_system(const CollocationScheme& scheme, const DdeSystem& sys) {
    return [scheme, sys](double t, const Vec& U) {
        return collocated_rhs(
            scheme, [&](const Vec& x, const std::vector<Vec>& delayed) { return sys(t, x, delayed); }, sys.delays, U,
            sys.n);
    };
}

std::vector<Mat> collocated_states(const Trajectory& traj, const CollocationScheme& scheme) {
    std::vector<Mat> out;
    out.reserve(static_cast<std::size_t>(scheme.M + 1));
    out.push_back(traj.states);
    for (int j = 1; j <= scheme.M; ++j) out.push_back(delayed_states(traj, -scheme.nodes[j]));
    return out;
}

}  // namespace delayid
