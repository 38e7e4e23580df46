#include "delayid/regression.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <Eigen/QR>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace delayid {

double RegressionConfig::effective_lambda() const {
    const double l = lambda.value_or(method == RegressionMethod::stls ? 0.05 : 0.01);
    if (!(l >= 0.0) || !std::isfinite(l)) throw ParameterError("lambda must be a finite non-negative number");
    return l;
}

int RegressionConfig::effective_max_iters() const {
    const int it = max_iters.value_or(method == RegressionMethod::stls ? 10 : 10000);
    if (it < 1) throw ParameterError("max_iters must be >= 1");
    return it;
}

namespace {

Vec column_rms(const Mat& A) {
    Vec s(A.cols());
    const double m = static_cast<double>(std::max<Eigen::Index>(A.rows(), 1));
    for (Eigen::Index j = 0; j < A.cols(); ++j) s[j] = std::sqrt(A.col(j).squaredNorm() / m);
    return s;
}

void check_inputs(const Mat& theta, const Mat& dx) {
    if (theta.rows() != dx.rows()) throw DimensionError("library and derivative row counts differ");
    if (theta.rows() < 1) throw ParameterError("regression needs at least one row");
    if (!theta.allFinite() || !dx.allFinite()) throw ParameterError("regression inputs must be finite");
}

}  // namespace

LeastSquaresResult least_squares(const Mat& A, const Vec& b) {
    if (A.rows() != b.size()) throw DimensionError("least_squares: row mismatch");
    LeastSquaresResult res;
    res.coef = Vec::Zero(A.cols());
    const Vec scale = column_rms(A);
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (scale[j] > 0.0) live.push_back(j);
    if (live.empty()) {
        res.degenerate = true;
        return res;
    }
    Mat scaled(A.rows(), static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k)
        scaled.col(static_cast<Eigen::Index>(k)) = A.col(live[k]) / scale[live[k]];
    const Eigen::CompleteOrthogonalDecomposition<Mat> cod(scaled);
    const Vec z = cod.solve(b);
    for (std::size_t k = 0; k < live.size(); ++k)
        res.coef[live[k]] = z[static_cast<Eigen::Index>(k)] / scale[live[k]];
    return res;
}

SparseCoefficients stls(const Mat& theta, const Mat& dx, const RegressionConfig& cfg) {
    check_inputs(theta, dx);
    const double lambda = cfg.effective_lambda();
    const int max_iters = cfg.effective_max_iters();
    const Eigen::Index P = theta.cols();
    SparseCoefficients out;
    out.values = Mat::Zero(P, dx.cols());
    out.lambda = lambda;

    for (Eigen::Index c = 0; c < dx.cols(); ++c) {
        std::vector<Eigen::Index> active(static_cast<std::size_t>(P));
        for (Eigen::Index j = 0; j < P; ++j) active[static_cast<std::size_t>(j)] = j;
        Vec coef = Vec::Zero(P);
        int rounds = 0;
        for (; rounds < max_iters; ++rounds) {
            Mat sub(theta.rows(), static_cast<Eigen::Index>(active.size()));
            for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = theta.col(active[k]);
            const LeastSquaresResult ls = least_squares(sub, dx.col(c));
            coef.setZero();
            std::vector<Eigen::Index> next;
            for (std::size_t k = 0; k < active.size(); ++k) {
                const double v = ls.coef[static_cast<Eigen::Index>(k)];
                if (std::abs(v) >= lambda && v != 0.0) {
                    coef[active[k]] = v;
                    next.push_back(active[k]);
                }
            }
            const bool unchanged = next.size() == active.size();
            active = std::move(next);
            if (unchanged || active.empty()) {
                ++rounds;
                break;
            }
        }
        // The last round may have dropped columns without refitting the survivors.
        if (!active.empty()) {
            Mat sub(theta.rows(), static_cast<Eigen::Index>(active.size()));
            for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = theta.col(active[k]);
            const LeastSquaresResult ls = least_squares(sub, dx.col(c));
            bool consistent = true;
            for (std::size_t k = 0; k < active.size(); ++k)
                if (std::abs(ls.coef[static_cast<Eigen::Index>(k)]) < lambda) consistent = false;
            if (consistent) {
                coef.setZero();
                for (std::size_t k = 0; k < active.size(); ++k) coef[active[k]] = ls.coef[static_cast<Eigen::Index>(k)];
            }
        }
        if (active.empty()) out.flags.push_back("column " + std::to_string(c + 1) + ": empty active set");
        out.values.col(c) = coef;
        out.iterations = std::max(out.iterations, rounds);
    }
    refresh_support(out);
    return out;
}

SparseCoefficients lasso(const Mat& theta, const Mat& dx, const RegressionConfig& cfg) {
    check_inputs(theta, dx);
    const double lambda = cfg.effective_lambda();
    const int max_sweeps = cfg.effective_max_iters();
    const Eigen::Index P = theta.cols();
    const double m = static_cast<double>(theta.rows());
    const Vec scale = column_rms(theta);
    Mat Z = theta;
    for (Eigen::Index j = 0; j < P; ++j)
        if (scale[j] > 0.0) Z.col(j) /= scale[j];

    SparseCoefficients out;
    out.values = Mat::Zero(P, dx.cols());
    out.lambda = lambda;
    for (Eigen::Index c = 0; c < dx.cols(); ++c) {
        // Objective in standardized coordinates: (1/2)||y - Z beta||^2 + lambda ||beta||_1,
        // with every column of Z at unit RMS (so z_j . z_j = m).
        Vec beta = Vec::Zero(P);
        Vec r = dx.col(c);
        bool converged = false;
        int sweep = 0;
        for (; sweep < max_sweeps && !converged; ++sweep) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < P; ++j) {
                if (scale[j] == 0.0) continue;
                const double rho = Z.col(j).dot(r) + m * beta[j];
                const double nb = (rho > lambda ? rho - lambda : (rho < -lambda ? rho + lambda : 0.0)) / m;
                const double delta = nb - beta[j];
                if (delta != 0.0) {
                    r -= delta * Z.col(j);
                    beta[j] = nb;
                    max_change = std::max(max_change, std::abs(delta));
                }
            }
            converged = max_change < cfg.tol;
        }
        if (!converged) out.flags.push_back("column " + std::to_string(c + 1) + ": coordinate descent did not converge");
        for (Eigen::Index j = 0; j < P; ++j) out.values(j, c) = scale[j] > 0.0 ? beta[j] / scale[j] : 0.0;
        out.iterations = std::max(out.iterations, sweep);
    }
    refresh_support(out);
    return out;
}

SparseCoefficients regress(const Mat& theta, const Mat& dx, const RegressionConfig& cfg) {
    return cfg.method == RegressionMethod::stls ? stls(theta, dx, cfg) : lasso(theta, dx, cfg);
}

void refresh_support(SparseCoefficients& xi) {
    xi.support.assign(static_cast<std::size_t>(xi.values.cols()), {});
    for (Eigen::Index c = 0; c < xi.values.cols(); ++c)
        for (Eigen::Index j = 0; j < xi.values.rows(); ++j)
            if (xi.values(j, c) != 0.0) xi.support[static_cast<std::size_t>(c)].push_back(static_cast<int>(j));
}

void write_coefficients_csv(std::ostream& os, const SparseCoefficients& xi, const std::vector<std::string>& labels) {
    if (labels.size() != static_cast<std::size_t>(xi.values.rows())) throw DimensionError("label count mismatch");
    os << "column_label";
    for (Eigen::Index c = 0; c < xi.values.cols(); ++c) os << ",xi_" << (c + 1);
    os << '\n';
    for (Eigen::Index j = 0; j < xi.values.rows(); ++j) {
        os << labels[static_cast<std::size_t>(j)];
        for (Eigen::Index c = 0; c < xi.values.cols(); ++c) os << ',' << format_double(xi.values(j, c));
        os << '\n';
    }
}

SparseCoefficients read_coefficients_csv(std::istream& is, std::vector<std::string>* labels) {
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("coefficient CSV is empty");
    const auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "column_label") throw ParameterError("coefficient CSV: bad header");
    const auto n = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> names;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != header.size()) throw ParameterError("coefficient CSV: ragged row '" + line + "'");
        names.push_back(f[0]);
        std::vector<double> r;
        for (std::size_t i = 1; i < f.size(); ++i) r.push_back(parse_double(f[i]));
        rows.push_back(std::move(r));
    }
    SparseCoefficients xi;
    xi.values.resize(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (Eigen::Index c = 0; c < n; ++c) xi.values(static_cast<Eigen::Index>(j), c) = rows[j][static_cast<std::size_t>(c)];
    refresh_support(xi);
    if (labels) *labels = std::move(names);
    return xi;
}

}  // namespace delayid
