#include "delayid/metrics.hpp"

#include "delayid/errors.hpp"
#include "delayid/format.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>
#include <utility>

namespace delayid {

NamedValues param_error(const NamedValues& truth, const NamedValues& recovered) {
    NamedValues out;
    for (const auto& [key, value] : truth) {
        const auto it = recovered.find(key);
        if (it != recovered.end()) out[key] = std::abs(value - it->second);
    }
    return out;
}

namespace {

void check_text(const std::string& field, const std::string& value) {
    if (value.find_first_of(",\"\n\r") != std::string::npos)
        throw ParameterError("benchmark row " + field + " '" + value + "' is not CSV-safe");
    if (value != trim(value)) throw ParameterError("benchmark row " + field + " has surrounding blanks");
}

void check_value(const std::string& field, const std::optional<double>& v) {
    if (v && (std::isnan(*v) || *v < 0.0)) throw ParameterError("benchmark row " + field + " must be non-negative");
}

enum class Kind { group, method, optimizer, regression, param, rmse_deriv_train, train_loss, rmse_deriv, rmse_traj,
                  calls, iters, time_s };

struct Column {
    std::string header;
    Kind kind;
    std::string key;  // param name for Kind::param
};

struct Layout {
    std::string id;
    std::vector<Column> columns;
    bool pivot_optimizers = false;
};

Column param(const std::string& key) { return {"|" + key + "-" + key + "_hat|", Kind::param, key}; }

const std::vector<Layout>& layouts() {
    static const std::vector<Layout> all = {
        {"table1",
         {{"sampling", Kind::group, ""},
          {"regression", Kind::regression, ""},
          {"RMSE_dx_train", Kind::rmse_deriv_train, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""}}},
        {"table2",
         {{"SINDy", Kind::method, ""},
          {"optimizer", Kind::optimizer, ""},
          param("r"),
          param("tau"),
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""}}},
        {"table3",
         {{"SINDy", Kind::method, ""},
          {"optimizer", Kind::optimizer, ""},
          param("beta"),
          param("gamma"),
          param("tau"),
          param("alpha"),
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""}}},
        {"table4", {{"model", Kind::group, ""}, {"SINDy", Kind::method, ""}}, true},
        {"table5",
         {{"loss", Kind::method, ""},
          {"size", Kind::group, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""},
          param("tau")}},
        {"table6",
         {{"loss", Kind::method, ""},
          {"size", Kind::group, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""},
          param("tau"),
          {"iters", Kind::iters, ""},
          {"time_s", Kind::time_s, ""}}},
        {"table7",
         {{"loss", Kind::method, ""},
          {"size", Kind::group, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""},
          param("tau1"),
          param("tau2")}},
        {"table8",
         {{"degree", Kind::group, ""},
          {"SINDy", Kind::method, ""},
          param("tau1"),
          param("tau2"),
          {"RMSE_dx_train", Kind::rmse_deriv_train, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""},
          {"calls", Kind::calls, ""},
          {"time_s", Kind::time_s, ""}}},
        {"table9",
         {{"network", Kind::group, ""},
          {"method", Kind::method, ""},
          param("tau1"),
          param("tau2"),
          {"train_loss", Kind::train_loss, ""},
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""},
          {"iters", Kind::iters, ""},
          {"time_s", Kind::time_s, ""}}},
        {"two_neuron",
         {{"SINDy", Kind::method, ""},
          {"optimizer", Kind::optimizer, ""},
          param("tau_s"),
          param("tau1"),
          param("tau2"),
          {"RMSE_dx", Kind::rmse_deriv, ""},
          {"RMSE_x", Kind::rmse_traj, ""}}},
    };
    return all;
}

const Layout& find_layout(const std::string& id) {
    for (const auto& l : layouts())
        if (l.id == id) return l;
    throw ParameterError("unknown table layout '" + id + "'");
}

const std::vector<std::string> kPivotOptimizers = {"BF", "BO", "PS"};

std::string number_cell(const std::optional<double>& v) { return v ? format_scientific(*v, 2) : "-"; }
std::string count_cell(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "-"; }

std::optional<double> parse_number(const std::string& cell) {
    if (cell == "-") return std::nullopt;
    return parse_double(cell);
}

std::optional<std::size_t> parse_count(const std::string& cell) {
    if (cell == "-") return std::nullopt;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(cell, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != cell.size() || cell.empty() || cell[0] == '-' || cell[0] == '+')
        throw ParameterError("not a count: '" + cell + "'");
    return static_cast<std::size_t>(v);
}

std::string cell(const BenchmarkRow& row, const Column& c) {
    switch (c.kind) {
        case Kind::group: return row.group;
        case Kind::method: return row.method;
        case Kind::optimizer: return row.optimizer;
        case Kind::regression: return row.regression;
        case Kind::param: {
            const auto it = row.param_errors.find(c.key);
            return it == row.param_errors.end() ? "-" : format_scientific(it->second, 2);
        }
        case Kind::rmse_deriv_train: return number_cell(row.rmse_deriv_train);
        case Kind::train_loss: return number_cell(row.train_loss);
        case Kind::rmse_deriv: return number_cell(row.rmse_deriv);
        case Kind::rmse_traj: return number_cell(row.rmse_traj);
        case Kind::calls: return count_cell(row.calls);
        case Kind::iters: return count_cell(row.iters);
        case Kind::time_s: return number_cell(row.time_s);
    }
    return {};
}

void assign(BenchmarkRow& row, const Column& c, const std::string& text) {
    switch (c.kind) {
        case Kind::group: row.group = text; break;
        case Kind::method: row.method = text; break;
        case Kind::optimizer: row.optimizer = text; break;
        case Kind::regression: row.regression = text; break;
        case Kind::param:
            if (auto v = parse_number(text)) row.param_errors[c.key] = *v;
            break;
        case Kind::rmse_deriv_train: row.rmse_deriv_train = parse_number(text); break;
        case Kind::train_loss: row.train_loss = parse_number(text); break;
        case Kind::rmse_deriv: row.rmse_deriv = parse_number(text); break;
        case Kind::rmse_traj: row.rmse_traj = parse_number(text); break;
        case Kind::calls: row.calls = parse_count(text); break;
        case Kind::iters: row.iters = parse_count(text); break;
        case Kind::time_s: row.time_s = parse_number(text); break;
    }
}

std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

std::optional<double> round2(const std::optional<double>& v) {
    if (!v) return v;
    return parse_double(format_scientific(*v, 2));
}

}  // namespace

void validate(const BenchmarkRow& row) {
    static const std::regex method_re("E|P[0-9]+|NDDE(-[A-Za-z0-9_]+)*");
    if (!std::regex_match(row.method, method_re))
        throw ParameterError("benchmark row method '" + row.method + "' is not E, P<M> or NDDE-<variant>");
    if (row.optimizer != "BF" && row.optimizer != "BO" && row.optimizer != "PS" && row.optimizer != "-")
        throw ParameterError("benchmark row optimizer '" + row.optimizer + "' is not BF, BO, PS or -");
    if (!row.regression.empty() && row.regression != "STLS" && row.regression != "LASSO")
        throw ParameterError("benchmark row regression '" + row.regression + "' is not STLS or LASSO");
    check_text("group", row.group);
    for (const auto& [key, value] : row.param_errors) {
        check_text("parameter name", key);
        check_value("parameter error " + key, value);
    }
    check_value("rmse_deriv_train", row.rmse_deriv_train);
    check_value("train_loss", row.train_loss);
    check_value("rmse_deriv", row.rmse_deriv);
    check_value("rmse_traj", row.rmse_traj);
    check_value("time_s", row.time_s);
}

std::vector<std::string> table_layouts() {
    std::vector<std::string> ids;
    for (const auto& l : layouts()) ids.push_back(l.id);
    return ids;
}

std::vector<std::string> table_header(const std::string& id) {
    const Layout& layout = find_layout(id);
    std::vector<std::string> header;
    for (const auto& c : layout.columns) header.push_back(c.header);
    if (layout.pivot_optimizers)
        for (const auto& opt : kPivotOptimizers) {
            header.push_back(opt + "_calls");
            header.push_back(opt + "_time_s");
        }
    return header;
}

std::string emit_table(const std::vector<BenchmarkRow>& rows, const std::string& id) {
    const Layout& layout = find_layout(id);
    std::string out = join(table_header(id)) + "\n";
    for (const auto& row : rows) validate(row);

    if (!layout.pivot_optimizers) {
        for (const auto& row : rows) {
            std::vector<std::string> cells;
            for (const auto& c : layout.columns) cells.push_back(cell(row, c));
            out += join(cells) + "\n";
        }
        return out;
    }

    // One line per (group, method) in order of first appearance, one calls/time block per optimizer.
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& row : rows) {
        if (row.optimizer == "-") throw ParameterError("table4 rows need an optimizer");
        const auto key = std::make_pair(row.group, row.method);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    for (const auto& key : keys) {
        std::vector<std::string> cells{key.first, key.second};
        for (const auto& opt : kPivotOptimizers) {
            const BenchmarkRow* match = nullptr;
            for (const auto& row : rows) {
                if (row.group != key.first || row.method != key.second || row.optimizer != opt) continue;
                if (match) throw ParameterError("duplicate table4 row " + key.first + "/" + key.second + "/" + opt);
                match = &row;
            }
            cells.push_back(match ? count_cell(match->calls) : "-");
            cells.push_back(match ? number_cell(match->time_s) : "-");
        }
        out += join(cells) + "\n";
    }
    return out;
}

std::vector<BenchmarkRow> parse_table(const std::string& csv, const std::string& id) {
    const Layout& layout = find_layout(id);
    const auto header = table_header(id);
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != header)
        throw ParameterError("table header does not match layout " + id);

    std::vector<BenchmarkRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParameterError("table line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(header.size()));
        BenchmarkRow base;
        for (std::size_t j = 0; j < layout.columns.size(); ++j) assign(base, layout.columns[j], cells[j]);
        if (!layout.pivot_optimizers) {
            validate(base);
            rows.push_back(std::move(base));
            continue;
        }
        for (std::size_t k = 0; k < kPivotOptimizers.size(); ++k) {
            const auto& calls = cells[layout.columns.size() + 2 * k];
            const auto& time = cells[layout.columns.size() + 2 * k + 1];
            if (calls == "-" && time == "-") continue;
            BenchmarkRow row = base;
            row.optimizer = kPivotOptimizers[k];
            row.calls = parse_count(calls);
            row.time_s = parse_number(time);
            validate(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

BenchmarkRow rounded(const BenchmarkRow& row) {
    BenchmarkRow out = row;
    for (auto& [key, value] : out.param_errors) value = *round2(value);
    out.rmse_deriv_train = round2(out.rmse_deriv_train);
    out.train_loss = round2(out.train_loss);
    out.rmse_deriv = round2(out.rmse_deriv);
    out.rmse_traj = round2(out.rmse_traj);
    out.time_s = round2(out.time_s);
    return out;
}

}  // namespace delayid
