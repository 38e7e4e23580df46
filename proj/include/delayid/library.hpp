#pragma once

#include "delayid/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace delayid {

struct SparseCoefficients;

/// Hill transform h = 1/(1 + z^alpha) applied to one input column.
struct HillTerm {
    double alpha = 1.0;
    int block = 1;   // which input block holds z
    int column = 0;  // state component within that block
};

/// Candidate-function library over one or more state blocks of width n.
struct LibrarySpec {
    int n = 1;
    int degree = 2;
    /// One entry per block; the block's variable names get this suffix.
    std::vector<std::string> block_suffixes{""};
    bool trig = false;
    std::optional<HillTerm> hill;

    int blocks() const { return static_cast<int>(block_suffixes.size()); }
    int variables() const { return n * blocks(); }

    /// Current state plus `delays` delayed blocks (suffixes _d1, _d2, ...).
    static LibrarySpec with_delays(int n, int degree, int delays, bool trig = false);
    /// Collocation nodes s_0..s_M (suffixes "", _s1, ..., _sM).
    static LibrarySpec with_nodes(int n, int degree, int M, bool trig = false);
};

void validate(const LibrarySpec& spec);
std::size_t column_count(const LibrarySpec& spec);
std::vector<std::string> variable_names(const LibrarySpec& spec);

struct LibraryMatrix {
    Mat values;
    LibrarySpec spec;
    std::vector<std::string> column_labels;
};

/// Precompiled term list; evaluation is pure and thread-safe.
class Library {
public:
    explicit Library(LibrarySpec spec);

    const LibrarySpec& spec() const { return spec_; }
    std::size_t size() const { return terms_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

    LibraryMatrix build(const std::vector<Mat>& blocks) const;
    /// One library row for concatenated block inputs (length n * blocks).
    void eval_row(const Vec& inputs, Vec& row) const;
    Vec eval_row(const Vec& inputs) const;
    /// Row times coefficients: the model derivative at one time point.
    Vec apply(const Mat& xi, const Vec& inputs) const;

private:
    enum class Kind { poly, sin, cos };
    struct Term {
        Kind kind = Kind::poly;
        std::vector<int> factors;  // indices into inputs; hill_index() means h
    };
    int hill_index() const { return spec_.variables(); }
    double hill_value(double z) const;

    LibrarySpec spec_;
    std::vector<Term> terms_;
    std::vector<std::string> labels_;
};

LibraryMatrix build(const LibrarySpec& spec, const std::vector<Mat>& blocks);

/// Convenience single-row evaluation; prefer Library::apply in loops.
Vec eval_model_rhs(const SparseCoefficients& xi, const LibrarySpec& spec, const Vec& inputs);

}  // namespace delayid
