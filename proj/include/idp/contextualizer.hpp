#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "lf.hpp"

namespace idp {

struct RefinementConfig {
    bool enabled = false;
    std::optional<double> percentile;  // nullopt: tuned on the validation split
    DistanceKind distance = DistanceKind::cosine;
    std::vector<double> grid{25, 50, 75, 100};

    void validate() const {
        auto check = [](double p) {
            if (!(p > 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
        };
        if (percentile) check(*percentile);
        if (grid.empty()) throw ConfigError("refinement.grid must not be empty");
        for (double p : grid) check(p);
    }
};

/// Distances from example `from` to each id in `ids`, same order.
inline std::vector<double> distances_from(const Corpus& corpus, ExampleId from,
                                          const std::vector<ExampleId>& ids, DistanceKind kind) {
    std::vector<double> d(ids.size());
    const auto& a = corpus.examples.at(from).features;
    for (std::size_t k = 0; k < ids.size(); ++k) d[k] = distance(a, corpus.examples[ids[k]].features, kind);
    return d;
}

/// Nearest-rank percentile: 0-based index ceil(p/100 * n) - 1 of the sorted values.
inline double nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) throw Error("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto k = static_cast<std::size_t>(std::ceil(p * n / 100.0 - 1e-9));
    k = std::clamp<std::size_t>(k, 1, values.size());
    return values[k - 1];
}

inline double refinement_radius(const LabelingFunction& lf, const Corpus& corpus, double percentile,
                                DistanceKind kind) {
    return nearest_rank(distances_from(corpus, lf.lineage_example, corpus.splits.train, kind), percentile);
}

struct RefinedLf {
    LabelingFunction lf;
    double radius = std::numeric_limits<double>::infinity();
    std::vector<ExampleId> retained;  // train ids that keep their vote

    int vote(const Example& x, double dist_to_lineage) const noexcept {
        if (dist_to_lineage > radius) return 0;
        return apply_lf(lf, x);
    }
};

/// Restricts the LF's train coverage to the ball of `radius` around its lineage.
inline RefinedLf refine_lf(const LabelingFunction& lf, double radius, const Corpus& corpus,
                           const PrimitiveIndex& index, DistanceKind kind) {
    RefinedLf r{lf, radius, {}};
    const auto& center = corpus.examples.at(lf.lineage_example).features;
    for (auto i : index[lf.primitive]) {
        if (i == lf.lineage_example || distance(center, corpus.examples[i].features, kind) <= radius)
            r.retained.push_back(i);
    }
    return r;
}

/// Unrefined wrapper: every posting retained.
inline RefinedLf unrefined(const LabelingFunction& lf, const PrimitiveIndex& index) {
    return RefinedLf{lf, std::numeric_limits<double>::infinity(), index[lf.primitive]};
}

/// Votes of refined LFs on arbitrary rows (e.g. the validation split).
inline LabelMatrix refined_label_matrix(const std::vector<RefinedLf>& lfs, const Corpus& corpus,
                                        const std::vector<ExampleId>& rows, DistanceKind kind) {
    LabelMatrix m(rows, lfs.size());
    for (std::size_t j = 0; j < lfs.size(); ++j) {
        const auto& rl = lfs[j];
        const auto& center = corpus.examples.at(rl.lf.lineage_example).features;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto& x = corpus.examples[rows[r]];
            if (!x.contains(rl.lf.primitive)) continue;
            if (std::isinf(rl.radius) || rows[r] == rl.lf.lineage_example ||
                distance(center, x.features, kind) <= rl.radius)
                m.set(r, j, to_int(rl.lf.label));
        }
    }
    return m;
}

struct LocalityCell {
    std::size_t lf = 0;  // position in the input list
    int quartile = 0;    // 1 = nearest
    double coverage = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN if nothing covered
};

struct LocalityReport {
    std::vector<LocalityCell> cells;
    std::vector<double> mean_coverage;  // per quartile, over LFs
    std::vector<double> mean_accuracy;  // per quartile, over LFs with coverage there
};

/// Coverage and gold accuracy of each LF in equal-count distance buckets of
/// the train split around its lineage example.
inline LocalityReport locality_report(std::span<const LabelingFunction> lfs, const Corpus& corpus,
                                      DistanceKind kind, int buckets = 4) {
    const auto& train = corpus.splits.train;
    const std::size_t n = train.size();
    if (buckets < 1 || n < static_cast<std::size_t>(buckets))
        throw Error("locality report needs at least " + std::to_string(buckets) + " train examples");
    if (!corpus.has_gold(train)) throw Error("locality report requires gold labels");
    LocalityReport rep;
    std::vector<double> cov_sum(buckets, 0.0), acc_sum(buckets, 0.0);
    std::vector<std::size_t> acc_n(buckets, 0);
    for (std::size_t j = 0; j < lfs.size(); ++j) {
        const auto& lf = lfs[j];
        auto d = distances_from(corpus, lf.lineage_example, train, kind);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
        for (int b = 0; b < buckets; ++b) {
            std::size_t lo = n * static_cast<std::size_t>(b) / buckets;
            std::size_t hi = n * static_cast<std::size_t>(b + 1) / buckets;
            std::size_t covered = 0, correct = 0;
            for (std::size_t k = lo; k < hi; ++k) {
                const auto& x = corpus.examples[train[order[k]]];
                if (!x.contains(lf.primitive)) continue;
                ++covered;
                if (*x.gold == lf.label) ++correct;
            }
            LocalityCell c{j, b + 1, static_cast<double>(covered) / static_cast<double>(hi - lo)};
            if (covered > 0) {
                c.accuracy = static_cast<double>(correct) / static_cast<double>(covered);
                acc_sum[b] += c.accuracy;
                ++acc_n[b];
            }
            cov_sum[b] += c.coverage;
            rep.cells.push_back(c);
        }
    }
    for (int b = 0; b < buckets; ++b) {
        rep.mean_coverage.push_back(lfs.empty() ? 0.0 : cov_sum[b] / static_cast<double>(lfs.size()));
        rep.mean_accuracy.push_back(acc_n[b] ? acc_sum[b] / static_cast<double>(acc_n[b])
                                             : std::numeric_limits<double>::quiet_NaN());
    }
    return rep;
}

inline void write_locality_csv(std::ostream& out, const LocalityReport& rep) {
    auto num = [](double v) {
        if (std::isnan(v)) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "lf_id,quartile,coverage,accuracy\n";
    for (const auto& c : rep.cells)
        out << c.lf << ',' << c.quartile << ',' << num(c.coverage) << ',' << num(c.accuracy) << '\n';
    for (std::size_t b = 0; b < rep.mean_accuracy.size(); ++b)
        out << "mean," << b + 1 << ',' << num(rep.mean_coverage[b]) << ',' << num(rep.mean_accuracy[b]) << '\n';
}

}  // namespace idp
