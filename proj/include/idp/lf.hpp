#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "corpus.hpp"

namespace idp {

/// Uni-polar primitive LF: votes `label` on examples containing `primitive`.
struct LabelingFunction {
    PrimitiveId primitive = 0;
    Label label = Label::positive;
    ExampleId lineage_example = 0;
    int created_at = 0;

    bool same_rule(const LabelingFunction& o) const noexcept {
        return primitive == o.primitive && label == o.label;
    }
    bool operator==(const LabelingFunction&) const = default;
};

inline int apply_lf(const LabelingFunction& lf, const Example& x) noexcept {
    return x.contains(lf.primitive) ? to_int(lf.label) : 0;
}

/// Row-major vote matrix over a fixed list of example ids.
struct LabelMatrix {
    std::vector<ExampleId> rows;
    std::size_t cols = 0;
    std::vector<std::int8_t> votes;

    LabelMatrix() = default;
    LabelMatrix(std::vector<ExampleId> row_ids, std::size_t m)
        : rows(std::move(row_ids)), cols(m), votes(rows.size() * m, 0) {}

    std::size_t n_rows() const noexcept { return rows.size(); }
    int at(std::size_t r, std::size_t j) const { return votes[r * cols + j]; }
    void set(std::size_t r, std::size_t j, int v) { votes[r * cols + j] = static_cast<std::int8_t>(v); }
    std::span<const std::int8_t> row(std::size_t r) const {
        return {votes.data() + r * cols, cols};
    }
    bool operator==(const LabelMatrix&) const = default;
};

inline LabelMatrix build_label_matrix(std::span<const LabelingFunction> lfs, const Corpus& corpus,
                                      const std::vector<ExampleId>& split) {
    LabelMatrix m(split, lfs.size());
    for (std::size_t r = 0; r < split.size(); ++r) {
        const auto& x = corpus.examples.at(split[r]);
        for (std::size_t j = 0; j < lfs.size(); ++j) m.set(r, j, apply_lf(lfs[j], x));
    }
    return m;
}

/// A column given by its vote and the sorted ids it fires on.
struct VoteColumn {
    Label label;
    const std::vector<ExampleId>* covered;
};

/// Matrix from precomputed coverage (postings or refined postings). Ids not
/// present in `rows` are ignored.
inline LabelMatrix build_label_matrix(std::span<const VoteColumn> columns,
                                      const std::vector<ExampleId>& rows) {
    LabelMatrix m(rows, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        const auto& cov = *columns[j].covered;
        auto it = rows.begin();
        for (auto id : cov) {
            it = std::lower_bound(it, rows.end(), id);
            if (it == rows.end()) break;
            if (*it == id) m.set(static_cast<std::size_t>(it - rows.begin()), j, to_int(columns[j].label));
        }
    }
    return m;
}

/// Per-example hard predictions, indexed by example id.
using Predictions = std::vector<Label>;

struct AccuracyEstimate {
    double value = 0.5;
    bool is_default = true;
};

inline constexpr double kDefaultAccuracy = 0.5;

/// Agreement of the LF with `predictions` over `covered`. Zero coverage or
/// missing predictions give the uninformative default.
inline AccuracyEstimate estimate_lf_accuracy(const LabelingFunction& lf,
                                             const std::vector<ExampleId>& covered,
                                             const Predictions* predictions) {
    if (predictions == nullptr || covered.empty()) return {kDefaultAccuracy, true};
    std::size_t agree = 0;
    for (auto i : covered)
        if ((*predictions)[i] == lf.label) ++agree;
    return {static_cast<double>(agree) / static_cast<double>(covered.size()), false};
}

inline AccuracyEstimate estimate_lf_accuracy(const LabelingFunction& lf, const PrimitiveIndex& index,
                                             const Predictions* predictions) {
    return estimate_lf_accuracy(lf, index[lf.primitive], predictions);
}

}  // namespace idp
