#pragma once

#include "delayid/models.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

enum class RegressionMethod { stls, lasso };

struct RegressionConfig {
    RegressionMethod method = RegressionMethod::stls;
    /// Unset means the method default: 0.05 for STLS, 0.01 for LASSO.
    std::optional<double> lambda;
    /// Unset means 10 thresholding rounds (STLS) or 10000 sweeps (LASSO).
    std::optional<int> max_iters;
    double tol = 1e-8;

    double effective_lambda() const;
    int effective_max_iters() const;
};

struct SparseCoefficients {
    Mat values;  // P x n
    std::vector<std::vector<int>> support;
    double lambda = 0.0;
    /// Human-readable warnings (zero column, non-convergence, degenerate solve).
    std::vector<std::string> flags;
    int iterations = 0;
};

struct LeastSquaresResult {
    Vec coef;
    bool degenerate = false;  // A had no usable column
};

/// min ||A xi - b|| via complete orthogonal decomposition of the
/// column-equilibrated matrix; rank-deficient directions get the minimum-norm
/// treatment in the equilibrated coordinates.
LeastSquaresResult least_squares(const Mat& A, const Vec& b);

SparseCoefficients stls(const Mat& theta, const Mat& dx, const RegressionConfig& cfg = {});
/// Cyclic coordinate descent on (1/2)||y - Z beta||^2 + lambda ||beta||_1 where
/// Z is theta with every column scaled to unit RMS; returned coefficients are
/// in the original column scale.
SparseCoefficients lasso(const Mat& theta, const Mat& dx, const RegressionConfig& cfg = {});
SparseCoefficients regress(const Mat& theta, const Mat& dx, const RegressionConfig& cfg);

/// Recomputes the per-column support sets from the nonzero pattern.
void refresh_support(SparseCoefficients& xi);

void write_coefficients_csv(std::ostream& os, const SparseCoefficients& xi, const std::vector<std::string>& labels);
SparseCoefficients read_coefficients_csv(std::istream& is, std::vector<std::string>* labels = nullptr);

}  // namespace delayid
