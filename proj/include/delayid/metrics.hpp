#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace delayid {

using NamedValues = std::map<std::string, double>;

/// |truth - recovered| for every truth key present in recovered. Keys missing
/// from recovered are left out of the result rather than reported as zero.
NamedValues param_error(const NamedValues& truth, const NamedValues& recovered);

/// One result row of a benchmark table.
///
/// method: E, P<M> or NDDE-<variant>; optimizer: BF, BO, PS or "-".
/// group is the row context shown in the first column of some layouts
/// (sampling type, model, network size, library degree).
struct BenchmarkRow {
    std::string group;
    std::string method = "E";
    std::string optimizer = "-";
    std::string regression;  // STLS / LASSO, empty when not reported
    NamedValues param_errors;
    std::optional<double> rmse_deriv_train;
    std::optional<double> train_loss;
    std::optional<double> rmse_deriv;
    std::optional<double> rmse_traj;
    std::optional<std::size_t> calls;
    std::optional<std::size_t> iters;
    std::optional<double> time_s;

    bool operator==(const BenchmarkRow&) const = default;
};

/// Vocabulary, sign and CSV-safety checks; throws ParameterError.
void validate(const BenchmarkRow& row);

/// Layout ids table1 .. table9.
std::vector<std::string> table_layouts();
std::vector<std::string> table_header(const std::string& layout);

/// CSV text with a fixed column order per layout. Numbers are written in
/// scientific notation with 2 significant digits, counts as integers, and
/// absent values as "-". Throws ParameterError for an unknown layout.
std::string emit_table(const std::vector<BenchmarkRow>& rows, const std::string& layout);

/// Inverse of emit_table for the fields the layout carries.
std::vector<BenchmarkRow> parse_table(const std::string& csv, const std::string& layout);

/// Rounds every numeric field to what emit_table writes.
BenchmarkRow rounded(const BenchmarkRow& row);

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace delayid
