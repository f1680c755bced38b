#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "label_model.hpp"

namespace idp {

enum class SelectorKind { random, abstain, disagree, seu };
enum class UserModel { accuracy_weighted, uniform };
enum class Utility { full, no_informativeness, no_correctness };
/// Scope of the user-model denominator: the fixed label, or both labels.
enum class Normalization { per_label, joint };

inline SelectorKind parse_selector_kind(const std::string& s) {
    if (s == "random") return SelectorKind::random;
    if (s == "abstain") return SelectorKind::abstain;
    if (s == "disagree") return SelectorKind::disagree;
    if (s == "seu") return SelectorKind::seu;
    throw ConfigError("unknown selector.kind '" + s + "'");
}
inline std::string to_string(SelectorKind k) {
    switch (k) {
        case SelectorKind::random: return "random";
        case SelectorKind::abstain: return "abstain";
        case SelectorKind::disagree: return "disagree";
        case SelectorKind::seu: return "seu";
    }
    return "?";
}
inline UserModel parse_user_model(const std::string& s) {
    if (s == "accuracy-weighted") return UserModel::accuracy_weighted;
    if (s == "uniform") return UserModel::uniform;
    throw ConfigError("unknown selector.user_model '" + s + "'");
}
inline std::string to_string(UserModel u) {
    return u == UserModel::accuracy_weighted ? "accuracy-weighted" : "uniform";
}
inline Utility parse_utility(const std::string& s) {
    if (s == "full") return Utility::full;
    if (s == "no-informativeness") return Utility::no_informativeness;
    if (s == "no-correctness") return Utility::no_correctness;
    throw ConfigError("unknown selector.utility '" + s + "'");
}
inline std::string to_string(Utility u) {
    switch (u) {
        case Utility::full: return "full";
        case Utility::no_informativeness: return "no-informativeness";
        case Utility::no_correctness: return "no-correctness";
    }
    return "?";
}
inline Normalization parse_normalization(const std::string& s) {
    if (s == "per-label") return Normalization::per_label;
    if (s == "joint") return Normalization::joint;
    throw ConfigError("unknown selector.normalization '" + s + "'");
}
inline std::string to_string(Normalization n) { return n == Normalization::per_label ? "per-label" : "joint"; }

struct SelectorConfig {
    SelectorKind kind = SelectorKind::seu;
    UserModel user_model = UserModel::accuracy_weighted;
    Utility utility = Utility::full;
    Normalization normalization = Normalization::per_label;
    bool multi_lf = false;
    // An LF already in the set adds nothing new, so its utility is 0.
    bool exclude_existing = true;
    double prior_positive = 0.5;

    void validate() const {
        if (!(prior_positive > 0.0 && prior_positive < 1.0))
            throw ConfigError("selector.prior_positive must lie in (0, 1)");
    }
};

/// Train ids still eligible for selection, kept sorted.
class CandidatePool {
  public:
    CandidatePool() = default;
    explicit CandidatePool(std::vector<ExampleId> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }
    const std::vector<ExampleId>& ids() const noexcept { return ids_; }
    bool empty() const noexcept { return ids_.empty(); }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(ExampleId i) const { return std::binary_search(ids_.begin(), ids_.end(), i); }
    bool remove(ExampleId i) {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), i);
        if (it == ids_.end() || *it != i) return false;
        ids_.erase(it);
        return true;
    }

  private:
    std::vector<ExampleId> ids_;
};

inline double prior_of(Label y, double prior_positive) noexcept {
    return y == Label::positive ? prior_positive : 1.0 - prior_positive;
}

/// acc(lambda_{z,y}) for every primitive, from integer agreement counts so that
/// acc(z,+1) + acc(z,-1) = 1.
struct AccuracyTable {
    std::vector<std::size_t> positive;  // predicted +1 among postings
    std::vector<std::size_t> total;
    bool informed = false;              // false: every entry is the 0.5 default

    double operator()(PrimitiveId z, Label y) const {
        if (!informed || total[z] == 0) return kDefaultAccuracy;
        std::size_t agree = y == Label::positive ? positive[z] : total[z] - positive[z];
        return static_cast<double>(agree) / static_cast<double>(total[z]);
    }
};

inline AccuracyTable build_accuracy_table(const PrimitiveIndex& index, const Predictions* predictions) {
    AccuracyTable t;
    t.positive.assign(index.size(), 0);
    t.total.assign(index.size(), 0);
    t.informed = predictions != nullptr;
    for (std::size_t z = 0; z < index.size(); ++z) {
        t.total[z] = index.postings[z].size();
        if (predictions)
            for (auto i : index.postings[z])
                if ((*predictions)[i] == Label::positive) ++t.positive[z];
    }
    return t;
}

/// Denominator of the user model for example x at label y.
inline double user_model_denominator(const Example& x, Label y, const AccuracyTable& acc, UserModel um,
                                     Normalization norm) {
    double den = 0.0;
    if (um == UserModel::uniform) {
        den = static_cast<double>(x.primitives.size());
        return norm == Normalization::joint ? 2.0 * den : den;
    }
    for (auto z : x.primitives) {
        if (norm == Normalization::joint) {
            den += acc(z, Label::positive);
            den += acc(z, Label::negative);
        } else {
            den += acc(z, y);
        }
    }
    return den;
}

/// P(lambda_{z,y} | x) given a precomputed denominator.
inline double user_model_with_denominator(const Example& x, Label y, PrimitiveId z, const AccuracyTable& acc,
                                          double prior_positive, UserModel um, double den) {
    if (!x.contains(z)) return 0.0;
    const double py = prior_of(y, prior_positive);
    if (um == UserModel::uniform) return py / den;
    if (den == 0.0) return py / static_cast<double>(x.primitives.size());
    return py * acc(z, y) / den;
}

inline double user_model(const Example& x, Label y, PrimitiveId z, const AccuracyTable& acc,
                         double prior_positive, UserModel um = UserModel::accuracy_weighted,
                         Normalization norm = Normalization::per_label) {
    if (!x.contains(z)) return 0.0;
    return user_model_with_denominator(x, y, z, acc, prior_positive, um,
                                       user_model_denominator(x, y, acc, um, norm));
}

/// LF utility over a coverage list: uncertainty-weighted agreement
/// with the end model, or one of its ablations.
inline double lf_utility(Label y, const std::vector<ExampleId>& covered, const std::vector<double>& psi,
                         const Predictions& predictions, Utility utility) {
    double s = 0.0;
    for (auto i : covered) {
        double sign = predictions[i] == y ? 1.0 : -1.0;
        switch (utility) {
            case Utility::full: s += psi[i] * sign; break;
            case Utility::no_informativeness: s += sign; break;
            case Utility::no_correctness: s += psi[i]; break;
        }
    }
    return s;
}

inline double lf_utility(const LabelingFunction& lf, const PrimitiveIndex& index, const std::vector<double>& psi,
                         const Predictions& predictions, Utility utility = Utility::full) {
    return lf_utility(lf.label, index[lf.primitive], psi, predictions, utility);
}

/// Psi_t for every (z, y), indexed [z][y == +1 ? 0 : 1].
struct UtilityTable {
    std::vector<std::array<double, 2>> psi;
    double operator()(PrimitiveId z, Label y) const { return psi[z][y == Label::positive ? 0 : 1]; }
};

inline UtilityTable build_utility_table(const PrimitiveIndex& index, const std::vector<double>& uncertainty,
                                        const Predictions& predictions, Utility utility,
                                        std::span<const LabelingFunction> existing, bool exclude_existing) {
    UtilityTable t;
    t.psi.assign(index.size(), {0.0, 0.0});
    for (std::size_t z = 0; z < index.size(); ++z) {
        const auto& cov = index.postings[z];
        if (cov.empty()) continue;
        t.psi[z][0] = lf_utility(Label::positive, cov, uncertainty, predictions, utility);
        t.psi[z][1] = lf_utility(Label::negative, cov, uncertainty, predictions, utility);
    }
    if (exclude_existing)
        for (const auto& lf : existing) t.psi[lf.primitive][lf.label == Label::positive ? 0 : 1] = 0.0;
    return t;
}

/// Everything a selector may look at. Gold labels are not part of it.
struct SelectionContext {
    const Corpus* corpus = nullptr;
    const PrimitiveIndex* index = nullptr;
    std::span<const LabelingFunction> lfs;
    const LabelMatrix* matrix = nullptr;            // train rows, current (refined) votes
    const std::vector<double>* uncertainty = nullptr;  // by example id
    const Predictions* predictions = nullptr;       // null before the first end model
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

struct Selection {
    std::optional<ExampleId> id;  // nullopt: pool exhausted
    bool fallback_random = false;
    std::size_t tied = 0;
    double best_score = 0.0;
};

using ScoreObserver = std::function<void(ExampleId, double)>;

/// Seeded uniform draw among exact maximizers.
inline Selection argmax_select(const std::vector<ExampleId>& ids, const std::vector<double>& scores,
                               std::uint64_t seed, std::uint64_t iteration) {
    Selection s;
    if (ids.empty()) return s;
    double best = *std::max_element(scores.begin(), scores.end());
    std::vector<ExampleId> tied;
    for (std::size_t k = 0; k < ids.size(); ++k)
        if (scores[k] == best) tied.push_back(ids[k]);
    auto rng = make_rng(seed, Stream::select, iteration);
    s.id = tied[uniform_index(rng, tied.size())];
    s.tied = tied.size();
    s.best_score = best;
    return s;
}

inline Selection select_random(const CandidatePool& pool, std::uint64_t seed, std::uint64_t iteration) {
    Selection s;
    if (pool.empty()) return s;
    auto rng = make_rng(seed, Stream::select, iteration);
    s.id = pool.ids()[uniform_index(rng, pool.size())];
    s.tied = pool.size();
    s.fallback_random = true;
    return s;
}

namespace detail {

/// Maps example id -> matrix row, or npos when not a row.
inline std::vector<std::size_t> row_lookup(const LabelMatrix& m, std::size_t n_examples) {
    std::vector<std::size_t> pos(n_examples, static_cast<std::size_t>(-1));
    for (std::size_t r = 0; r < m.n_rows(); ++r) pos[m.rows[r]] = r;
    return pos;
}

}  // namespace detail

inline double abstain_count(std::span<const std::int8_t> row) {
    return static_cast<double>(std::count(row.begin(), row.end(), std::int8_t{0}));
}

/// 1 - max_y c_y / |V|, or 0 with fewer than two votes.
inline double disagreement(std::span<const std::int8_t> row) {
    int cp = 0, cn = 0;
    for (auto v : row) {
        if (v > 0) ++cp;
        else if (v < 0) ++cn;
    }
    int total = cp + cn;
    if (total < 2) return 0.0;
    return 1.0 - static_cast<double>(std::max(cp, cn)) / static_cast<double>(total);
}

inline Selection select_by_matrix(const CandidatePool& pool, const SelectionContext& ctx, bool disagree,
                                  const ScoreObserver& observer = {}) {
    if (pool.empty()) return {};
    if (ctx.matrix == nullptr || ctx.matrix->cols == 0) return select_random(pool, ctx.seed, ctx.iteration);
    auto pos = detail::row_lookup(*ctx.matrix, ctx.corpus->size());
    std::vector<double> scores(pool.size(), 0.0);
    for (std::size_t k = 0; k < pool.size(); ++k) {
        auto r = pos[pool.ids()[k]];
        if (r == static_cast<std::size_t>(-1)) continue;
        auto row = ctx.matrix->row(r);
        scores[k] = disagree ? disagreement(row) : abstain_count(row);
        if (observer) observer(pool.ids()[k], scores[k]);
    }
    return argmax_select(pool.ids(), scores, ctx.seed, ctx.iteration);
}

inline Selection select_abstain(const CandidatePool& pool, const SelectionContext& ctx,
                                const ScoreObserver& observer = {}) {
    return select_by_matrix(pool, ctx, false, observer);
}

inline Selection select_disagree(const CandidatePool& pool, const SelectionContext& ctx,
                                 const ScoreObserver& observer = {}) {
    return select_by_matrix(pool, ctx, true, observer);
}

/// Expected utility of the LF a user would write after seeing x.
inline double seu_score(const Example& x, const AccuracyTable& acc, const UtilityTable& psi,
                        const SelectorConfig& cfg) {
    double score = 0.0;
    for (Label y : kLabels) {
        if (cfg.multi_lf) {
            const double py = prior_of(y, cfg.prior_positive);
            for (auto z : x.primitives) {
                double a = cfg.user_model == UserModel::uniform ? kDefaultAccuracy : acc(z, y);
                if (a > 0.5) score += py * a * psi(z, y);
            }
            continue;
        }
        const double den = user_model_denominator(x, y, acc, cfg.user_model, cfg.normalization);
        for (auto z : x.primitives)
            score += user_model_with_denominator(x, y, z, acc, cfg.prior_positive, cfg.user_model, den) *
                     psi(z, y);
    }
    return score;
}

inline Selection select_seu(const CandidatePool& pool, const SelectionContext& ctx, const SelectorConfig& cfg,
                            const ScoreObserver& observer = {}) {
    if (pool.empty()) return {};
    if (ctx.predictions == nullptr || ctx.uncertainty == nullptr)
        return select_random(pool, ctx.seed, ctx.iteration);  // cold start
    const auto acc = build_accuracy_table(*ctx.index, ctx.predictions);
    const auto psi = build_utility_table(*ctx.index, *ctx.uncertainty, *ctx.predictions, cfg.utility, ctx.lfs,
                                         cfg.exclude_existing);
    std::vector<double> scores(pool.size());
    for (std::size_t k = 0; k < pool.size(); ++k) {
        scores[k] = seu_score(ctx.corpus->examples[pool.ids()[k]], acc, psi, cfg);
        if (observer) observer(pool.ids()[k], scores[k]);
    }
    return argmax_select(pool.ids(), scores, ctx.seed, ctx.iteration);
}

inline Selection select(const CandidatePool& pool, const SelectionContext& ctx, const SelectorConfig& cfg,
                        const ScoreObserver& observer = {}) {
    switch (cfg.kind) {
        case SelectorKind::random: return select_random(pool, ctx.seed, ctx.iteration);
        case SelectorKind::abstain: return select_abstain(pool, ctx, observer);
        case SelectorKind::disagree: return select_disagree(pool, ctx, observer);
        case SelectorKind::seu: return select_seu(pool, ctx, cfg, observer);
    }
    return {};
}

}  // namespace idp
