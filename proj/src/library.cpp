#include "delayid/library.hpp"

#include "delayid/errors.hpp"
#include "delayid/regression.hpp"

#include <cmath>
#include <functional>

namespace delayid {

LibrarySpec LibrarySpec::with_delays(int n, int degree, int delays, bool trig) {
    LibrarySpec s;
    s.n = n;
    s.degree = degree;
    s.trig = trig;
    s.block_suffixes = {""};
    for (int j = 1; j <= delays; ++j) s.block_suffixes.push_back("_d" + std::to_string(j));
    return s;
}

LibrarySpec LibrarySpec::with_nodes(int n, int degree, int M, bool trig) {
    LibrarySpec s;
    s.n = n;
    s.degree = degree;
    s.trig = trig;
    s.block_suffixes = {""};
    for (int j = 1; j <= M; ++j) s.block_suffixes.push_back("_s" + std::to_string(j));
    return s;
}

void validate(const LibrarySpec& spec) {
    if (spec.n < 1) throw ParameterError("library state width must be >= 1");
    if (spec.degree < 1) throw ParameterError("library degree must be >= 1");
    if (spec.blocks() < 1) throw ParameterError("library needs at least one block");
    if (spec.hill) {
        if (spec.hill->block < 0 || spec.hill->block >= spec.blocks() || spec.hill->column < 0 ||
            spec.hill->column >= spec.n)
            throw ParameterError("Hill term refers to a missing column");
        if (!(spec.hill->alpha > 0.0) || !std::isfinite(spec.hill->alpha))
            throw ParameterError("Hill exponent must be positive");
    }
}

std::vector<std::string> variable_names(const LibrarySpec& spec) {
    std::vector<std::string> names;
    for (const auto& suffix : spec.block_suffixes)
        for (int c = 0; c < spec.n; ++c)
            names.push_back((spec.n == 1 ? std::string("x") : "x" + std::to_string(c + 1)) + suffix);
    return names;
}

namespace {

// Monomials of total degree 1..d over `vars` variables in graded lexicographic order,
// each as a non-decreasing list of variable indices.
std::vector<std::vector<int>> graded_monomials(int vars, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int start, int remaining) {
        if (remaining == 0) {
            out.push_back(cur);
            return;
        }
        for (int v = start; v < vars; ++v) {
            cur.push_back(v);
            rec(v, remaining - 1);
            cur.pop_back();
        }
    };
    for (int d = 1; d <= degree; ++d) rec(0, d);
    return out;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::size_t column_count(const LibrarySpec& spec) {
    validate(spec);
    const auto N = static_cast<std::size_t>(spec.variables());
    const auto d = static_cast<std::size_t>(spec.degree);
    std::size_t count = binomial(N + d, d);
    if (spec.trig) count += 2 * N;
    if (spec.hill) count += binomial(N + d - 1, d - 1) + (d >= 2 ? 1 : 0);
    return count;
}

Library::Library(LibrarySpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    const int N = spec_.variables();
    std::vector<std::string> names = variable_names(spec_);
    if (spec_.hill) names.push_back("h(" + names[static_cast<std::size_t>(spec_.hill->block * spec_.n + spec_.hill->column)] + ")");

    auto label_of = [&](const std::vector<int>& f) {
        std::string s;
        for (std::size_t i = 0; i < f.size();) {
            std::size_t j = i;
            while (j < f.size() && f[j] == f[i]) ++j;
            if (!s.empty()) s += '*';
            s += names[static_cast<std::size_t>(f[i])];
            if (j - i > 1) s += "^" + std::to_string(j - i);
            i = j;
        }
        return s;
    };

    terms_.push_back({Kind::poly, {}});
    labels_.push_back("1");
    // The Hill column joins the graded order as one extra variable, keeping only
    // monomials linear in h plus h^2.
    const int vars = spec_.hill ? N + 1 : N;
    for (auto& f : graded_monomials(vars, spec_.degree)) {
        int hp = 0;
        for (int v : f) hp += (v == N);
        const bool keep = hp == 0 || hp == 1 || (hp == 2 && f.size() == 2);
        if (!keep) continue;
        labels_.push_back(label_of(f));
        terms_.push_back({Kind::poly, std::move(f)});
    }
    if (spec_.trig) {
        for (int v = 0; v < N; ++v) {
            terms_.push_back({Kind::sin, {v}});
            labels_.push_back("sin(" + names[static_cast<std::size_t>(v)] + ")");
            terms_.push_back({Kind::cos, {v}});
            labels_.push_back("cos(" + names[static_cast<std::size_t>(v)] + ")");
        }
    }
}

double Library::hill_value(double z) const {
    const double alpha = spec_.hill->alpha;
    if (z < 0.0 && alpha != std::round(alpha))
        throw DomainError("Hill term with non-integer exponent applied to a negative value");
    return 1.0 / (1.0 + std::pow(z, alpha));
}

void Library::eval_row(const Vec& inputs, Vec& row) const {
    if (inputs.size() != spec_.variables()) throw DimensionError("library row input width mismatch");
    row.resize(static_cast<Eigen::Index>(terms_.size()));
    double h = 0.0;
    if (spec_.hill) h = hill_value(inputs[spec_.hill->block * spec_.n + spec_.hill->column]);
    const int hi = hill_index();
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        const Term& t = terms_[k];
        double v = 1.0;
        switch (t.kind) {
            case Kind::poly:
                for (int f : t.factors) v *= (f == hi) ? h : inputs[f];
                break;
            case Kind::sin: v = std::sin(inputs[t.factors[0]]); break;
            case Kind::cos: v = std::cos(inputs[t.factors[0]]); break;
        }
        row[static_cast<Eigen::Index>(k)] = v;
    }
}

Vec Library::eval_row(const Vec& inputs) const {
    Vec row;
    eval_row(inputs, row);
    return row;
}

Vec Library::apply(const Mat& xi, const Vec& inputs) const {
    if (xi.rows() != static_cast<Eigen::Index>(terms_.size()))
        throw DimensionError("coefficient rows do not match library size");
    Vec row;
    eval_row(inputs, row);
    return xi.transpose() * row;
}

LibraryMatrix Library::build(const std::vector<Mat>& blocks) const {
    if (static_cast<int>(blocks.size()) != spec_.blocks()) throw DimensionError("library block count mismatch");
    const Eigen::Index m = blocks.front().rows();
    for (const auto& b : blocks) {
        if (b.rows() != m || b.cols() != spec_.n) throw DimensionError("library block shape mismatch");
        if (!b.allFinite()) throw ParameterError("library blocks must be finite");
    }
    LibraryMatrix out;
    out.spec = spec_;
    out.column_labels = labels_;
    out.values.resize(m, static_cast<Eigen::Index>(terms_.size()));
    Vec inputs(spec_.variables());
    Vec row;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (int b = 0; b < spec_.blocks(); ++b) inputs.segment(b * spec_.n, spec_.n) = blocks[static_cast<std::size_t>(b)].row(i).transpose();
        eval_row(inputs, row);
        out.values.row(i) = row.transpose();
    }
    return out;
}

LibraryMatrix build(const LibrarySpec& spec, const std::vector<Mat>& blocks) { return Library(spec).build(blocks); }

Vec eval_model_rhs(const SparseCoefficients& xi, const LibrarySpec& spec, const Vec& inputs) {
    return Library(spec).apply(xi.values, inputs);
}

}  // namespace delayid
