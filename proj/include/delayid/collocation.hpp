#pragma once

#include "delayid/models.hpp"
#include "delayid/solver.hpp"

#include <functional>
#include <vector>

namespace delayid {

struct Trajectory;

/// Chebyshev extremal nodes s_i = (tau_bar/2)(cos(i*pi/M) - 1), i = 0..M,
/// decreasing from 0 to -tau_bar, with barycentric weights and the
/// differentiation rows for nodes 1..M.
struct CollocationScheme {
    int M = 0;
    double tau_bar = 0.0;
    Vec nodes;    // M+1
    Vec weights;  // M+1 barycentric weights
    Mat D;        // M x (M+1)
};

CollocationScheme make_scheme(int M, double tau_bar);

/// Block i (length n) of a flat collocated state approximates x(t + s_i).
inline Vec node_block(const Vec& U, int n, int i) { return U.segment(static_cast<Eigen::Index>(i) * n, n); }

/// Barycentric Lagrange interpolation of the node values U at s in [-tau_bar, 0].
Vec interpolate(const CollocationScheme& scheme, const Vec& U, int n, double s);

/// Maps node values (rows = nodes, cols = components) to the interpolant at s.
/// Returns the row of Lagrange basis values l_j(s).
Vec lagrange_row(const CollocationScheme& scheme, double s);

/// f_block receives the current state and the states at the requested delays.
using BlockRhs = std::function<Vec(const Vec& current, const std::vector<Vec>& delayed)>;

/// d/dt of the collocated state: block 0 from f_block, blocks 1..M from D.
Vec collocated_rhs(const CollocationScheme& scheme, const BlockRhs& f_block, const std::vector<double>& delays,
                   const Vec& U, int n);

/// Node-wise evaluation of the history (R_M).
Vec restrict_history(const CollocationScheme& scheme, const HistorySpec& history);

/// ODE right-hand side of the collocated approximation of sys (delays <= tau_bar).
OdeRhs collocated_system(const CollocationScheme& scheme, const DdeSystem& sys);

/// X_{s_j} for j = 0..M: row i holds x(t_i + s_j) using the trajectory's lookup rule.
std::vector<Mat> collocated_states(const Trajectory& traj, const CollocationScheme& scheme);

}  // namespace delayid
