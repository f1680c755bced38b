#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace idp {

class InvalidSubmission : public Error {
  public:
    using Error::Error;
};

inline constexpr int kSnapshotVersion = 1;

enum class Event { created, duplicate, skip };

inline std::string to_string(Event e) {
    switch (e) {
        case Event::created: return "created";
        case Event::duplicate: return "duplicate";
        case Event::skip: return "skip";
    }
    return "?";
}
inline Event parse_event(const std::string& s) {
    if (s == "created") return Event::created;
    if (s == "duplicate") return Event::duplicate;
    if (s == "skip") return Event::skip;
    throw RestoreError("unknown history event '" + s + "'");
}

struct CurvePoint {
    int iteration;
    double value;
};

struct CurveSummary {
    std::vector<CurvePoint> points;
    double mean = 0.0;
    bool truncated = false;  // pool ran out before the requested iterations
};

inline double curve_mean(const std::vector<CurvePoint>& pts) {
    if (pts.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : pts) s += p.value;
    return s / static_cast<double>(pts.size());
}

struct HistoryEntry {
    int iteration;
    ExampleId example;
    Event event;
    std::optional<LabelingFunction> lf;  // as submitted; absent for skip
};

struct IterationReport {
    int iteration = 0;
    ExampleId selected = 0;
    Event event = Event::skip;
    std::optional<LabelingFunction> lf;
    std::size_t coverage = 0;  // train votes of the LF after refinement
    std::size_t n_lfs = 0;
    std::size_t pool_size = 0;
    std::optional<double> metric;
    bool fallback_random = false;
    std::vector<std::string> warnings;
};

/// Validation score of the soft labels produced by `lfs` refined at one
/// percentile: argmax hits count 1, ties and uncovered rows 0.5.
struct PercentileScore {
    double percentile;
    double validation_accuracy;
};

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}
}  // namespace detail

class Session {
  public:
    /// `tuned_percentile` skips validation tuning when the refinement
    /// percentile is "auto" (used by restore).
    Session(std::shared_ptr<const Corpus> corpus, SessionConfig config,
            std::optional<double> tuned_percentile = std::nullopt)
        : corpus_(std::move(corpus)), config_(std::move(config)) {
        if (!corpus_) throw Error("session needs a corpus");
        config_.validate();
        index_ = std::make_shared<PrimitiveIndex>(build_primitive_index(*corpus_));
        pool_ = CandidatePool(corpus_->splits.train);
        model_ = zero_model(corpus_->feature_dim, config_.end_model);
        uncertainty_.assign(corpus_->size(), 0.0);
        metric_available_ = !corpus_->splits.test.empty() && corpus_->has_gold(corpus_->splits.test);
        if (config_.mode == SessionMode::simulate && !corpus_->has_gold(corpus_->splits.train))
            throw ConfigError("simulate mode needs gold labels on the train split");
        if (config_.refinement.enabled) {
            if (config_.refinement.percentile) {
                percentile_ = *config_.refinement.percentile;
            } else if (tuned_percentile) {
                percentile_ = *tuned_percentile;
                tuned_ = true;
            } else {
                percentile_ = tune_percentile(corpus_, config_, &tuning_scores_);
                tuned_ = true;
            }
        }
        refresh_uncertainty();
    }

    // -- accessors ----------------------------------------------------------
    const Corpus& corpus() const noexcept { return *corpus_; }
    std::shared_ptr<const Corpus> corpus_ptr() const noexcept { return corpus_; }
    const PrimitiveIndex& index() const noexcept { return *index_; }
    const SessionConfig& config() const noexcept { return config_; }
    int iteration() const noexcept { return iteration_; }
    const std::vector<LabelingFunction>& lfs() const noexcept { return lfs_; }
    const std::vector<RefinedLf>& refined_lfs() const noexcept { return refined_; }
    const std::vector<HistoryEntry>& history() const noexcept { return history_; }
    const std::vector<CurvePoint>& curve() const noexcept { return curve_; }
    const CandidatePool& pool() const noexcept { return pool_; }
    std::optional<ExampleId> pending() const noexcept { return pending_; }
    bool complete() const noexcept { return pool_.empty() && !pending_; }
    const LinearModel& model() const noexcept { return model_; }
    bool has_model() const noexcept { return has_model_; }
    const LabelModelFit& label_model() const noexcept { return fit_; }
    const LabelMatrix& matrix() const noexcept { return matrix_; }
    const std::vector<double>& uncertainty() const noexcept { return uncertainty_; }
    const Predictions* predictions() const noexcept { return has_model_ ? &predictions_ : nullptr; }
    std::optional<double> percentile() const noexcept { return percentile_; }
    bool percentile_tuned() const noexcept { return tuned_; }
    const std::vector<PercentileScore>& tuning_scores() const noexcept { return tuning_scores_; }
    bool metric_available() const noexcept { return metric_available_; }

    void set_score_observer(ScoreObserver obs) { observer_ = std::move(obs); }

    SelectionContext selection_context() const {
        SelectionContext ctx;
        ctx.corpus = corpus_.get();
        ctx.index = index_.get();
        ctx.lfs = lfs_;
        ctx.matrix = lfs_.empty() ? nullptr : &matrix_;
        ctx.uncertainty = &uncertainty_;
        ctx.predictions = predictions();
        ctx.seed = config_.seed;
        ctx.iteration = static_cast<std::uint64_t>(iteration_) + 1;
        return ctx;
    }

    // -- loop ---------------------------------------------------------------

    /// Stage 1: picks the development example. nullopt when the pool is empty.
    std::optional<ExampleId> next() {
        if (pending_) throw StateError("a selected example is awaiting a response");
        if (pool_.empty()) return std::nullopt;
        auto sel = select(pool_, selection_context(), config_.selector, observer_);
        pending_ = sel.id;
        last_fallback_ = sel.fallback_random;
        return pending_;
    }

    /// Stage 2 answer for the pending example (nullopt = skip), then stage 3.
    IterationReport submit(std::optional<std::pair<PrimitiveId, Label>> answer) {
        if (!pending_) throw StateError("no example is pending");
        const ExampleId x = *pending_;
        const auto& ex = corpus_->examples[x];
        if (answer && !ex.contains(answer->first))
            throw InvalidSubmission("primitive is not contained in the pending example");

        IterationReport rep;
        pool_.remove(x);
        pending_.reset();
        ++iteration_;
        rep.iteration = iteration_;
        rep.selected = x;
        rep.fallback_random = last_fallback_;

        HistoryEntry h{iteration_, x, Event::skip, std::nullopt};
        if (answer) {
            LabelingFunction lf{answer->first, answer->second, x, iteration_};
            h.lf = lf;
            auto dup = std::find_if(lfs_.begin(), lfs_.end(), [&](const auto& o) { return o.same_rule(lf); });
            if (dup != lfs_.end()) {
                h.event = Event::duplicate;
                rep.lf = *dup;
                rep.coverage = refined_[static_cast<std::size_t>(dup - lfs_.begin())].retained.size();
                rep.warnings.push_back("duplicate LF merged with the one created at iteration " +
                                       std::to_string(dup->created_at));
            } else {
                h.event = Event::created;
                add_lf(lf);
                rep.lf = lf;
                rep.coverage = refined_.back().retained.size();
                refit(rep.warnings);
            }
        }
        rep.event = h.event;
        history_.push_back(std::move(h));
        rep.n_lfs = lfs_.size();
        rep.pool_size = pool_.size();
        if (iteration_ % config_.eval_every == 0 && metric_available_) {
            double v = evaluate(model_, *corpus_, corpus_->splits.test, config_.metric);
            curve_.push_back({iteration_, v});
            rep.metric = v;
        }
        return rep;
    }

    /// One simulated iteration. nullopt once the pool is exhausted.
    std::optional<IterationReport> step() {
        if (config_.mode != SessionMode::simulate) throw StateError("step() requires simulate mode");
        auto x = next();
        if (!x) return std::nullopt;
        auto res = simulate_response(corpus_->examples[*x], *corpus_, *index_, config_.simulator, config_.seed,
                                     static_cast<std::uint64_t>(iteration_) + 1);
        if (res.lf) return submit(std::make_pair(res.lf->primitive, res.lf->label));
        return submit(std::nullopt);
    }

    /// Runs until `config.iterations` iterations are done or the pool ends.
    CurveSummary run(const std::function<void(const IterationReport&)>& on_report = {}) {
        CurveSummary s;
        while (iteration_ < config_.iterations) {
            auto rep = step();
            if (!rep) {
                s.truncated = true;
                break;
            }
            if (on_report) on_report(*rep);
        }
        s.points = curve_;
        s.mean = curve_mean(curve_);
        return s;
    }

    /// Up to `limit` train examples containing z, seeded by session state.
    std::vector<ExampleId> explore(PrimitiveId z, std::size_t limit) const {
        std::vector<ExampleId> ids = index_->postings.at(z);
        Fnv1a h;
        h.add_u64(z);
        h.add_u64(static_cast<std::uint64_t>(iteration_));
        auto rng = make_rng(config_.seed, Stream::explore, h.value());
        std::shuffle(ids.begin(), ids.end(), rng);
        if (ids.size() > limit) ids.resize(limit);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    // -- persistence --------------------------------------------------------

    json snapshot() const {
        json j;
        j["format_version"] = kSnapshotVersion;
        j["corpus_fingerprint"] = detail::hex64(corpus_->fingerprint());
        j["config"] = session_config_to_json(config_);
        j["tuned_percentile"] = tuned_ && percentile_ ? json(*percentile_) : json(nullptr);
        j["iteration"] = iteration_;
        j["lfs"] = json::array();
        for (const auto& lf : lfs_) j["lfs"].push_back(lf_to_json(lf));
        j["history"] = json::array();
        for (const auto& h : history_) {
            json e = {{"iteration", h.iteration}, {"example", h.example}, {"event", to_string(h.event)}};
            if (h.lf) e["lf"] = lf_to_json(*h.lf);
            j["history"].push_back(e);
        }
        j["pending"] = pending_ ? json(*pending_) : json(nullptr);
        j["curve"] = json::array();
        for (const auto& p : curve_) j["curve"].push_back({{"iteration", p.iteration}, {"value", p.value}});
        if (has_model_)
            j["model"] = {{"weights", model_.weights},
                          {"bias", model_.bias},
                          {"config",
                           {{"epochs", model_.config.epochs},
                            {"lr", model_.config.learning_rate},
                            {"l2", model_.config.l2}}}};
        else
            j["model"] = nullptr;
        return j;
    }

    static Session restore(const json& j, std::shared_ptr<const Corpus> corpus) {
        try {
            if (!j.is_object() || !j.contains("format_version")) throw RestoreError("not a session snapshot");
            if (j.at("format_version").get<int>() != kSnapshotVersion)
                throw RestoreError("snapshot format version " + j.at("format_version").dump() +
                                   " is not supported");
            if (j.at("corpus_fingerprint").get<std::string>() != detail::hex64(corpus->fingerprint()))
                throw RestoreError("snapshot was taken on a different corpus");
            auto cfg = session_config_from_json(merge_config(j.at("config")));
            std::optional<double> tuned;
            if (!j.at("tuned_percentile").is_null()) tuned = j.at("tuned_percentile").get<double>();
            Session s(corpus, cfg, tuned);
            for (const auto& e : j.at("history")) {
                HistoryEntry h{e.at("iteration").get<int>(), e.at("example").get<ExampleId>(),
                               parse_event(e.at("event").get<std::string>()), std::nullopt};
                if (e.contains("lf")) h.lf = s.lf_from_json(e.at("lf"));
                if (!s.pool_.remove(h.example)) throw RestoreError("history selects an example twice");
                s.history_.push_back(h);
            }
            for (const auto& l : j.at("lfs")) s.add_lf(s.lf_from_json(l));
            s.iteration_ = j.at("iteration").get<int>();
            if (!j.at("pending").is_null()) {
                auto p = j.at("pending").get<ExampleId>();
                if (!s.pool_.contains(p)) throw RestoreError("pending example is not in the pool");
                s.pending_ = p;
            }
            for (const auto& p : j.at("curve"))
                s.curve_.push_back({p.at("iteration").get<int>(), p.at("value").get<double>()});
            if (!s.lfs_.empty()) s.refit_label_model();
            if (!j.at("model").is_null()) {
                const auto& m = j.at("model");
                s.model_.weights = m.at("weights").get<std::vector<double>>();
                s.model_.bias = m.at("bias").get<double>();
                if (s.model_.weights.size() != corpus->feature_dim)
                    throw RestoreError("model dimension does not match the corpus");
                s.has_model_ = true;
                s.predictions_ = predict_all(s.model_, *corpus);
            }
            return s;
        } catch (const json::exception& e) {
            throw RestoreError(std::string("corrupt snapshot: ") + e.what());
        } catch (const ConfigError& e) {
            throw RestoreError(std::string("corrupt snapshot config: ") + e.what());
        }
    }

    static Session restore_file(const std::string& path, std::shared_ptr<const Corpus> corpus) {
        std::ifstream in(path);
        if (!in) throw RestoreError("cannot open snapshot '" + path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw RestoreError(std::string("corrupt snapshot: ") + e.what());
        }
        return restore(j, std::move(corpus));
    }

    json lf_to_json(const LabelingFunction& lf) const {
        return {{"primitive", corpus_->primitive_name(lf.primitive)},
                {"label", to_int(lf.label)},
                {"lineage_example", lf.lineage_example},
                {"created_at", lf.created_at}};
    }

    LabelingFunction lf_from_json(const json& j) const {
        auto name = j.at("primitive").get<std::string>();
        auto z = corpus_->find_primitive(name);
        if (!z) throw RestoreError("unknown primitive '" + name + "' in snapshot");
        LabelingFunction lf{*z, label_from_int(j.at("label").get<long long>()),
                            j.at("lineage_example").get<ExampleId>(), j.at("created_at").get<int>()};
        if (lf.lineage_example >= corpus_->size() || !corpus_->examples[lf.lineage_example].contains(*z))
            throw RestoreError("LF lineage example does not contain its primitive");
        return lf;
    }

    /// Percentile chosen on the validation split from the LFs of a standard
    /// pilot run with the same seed; ties go to the larger percentile.
    static double tune_percentile(const std::shared_ptr<const Corpus>& corpus, const SessionConfig& config,
                                  std::vector<PercentileScore>* scores = nullptr) {
        if (config.mode != SessionMode::simulate)
            throw ConfigError("refinement.percentile \"auto\" needs simulate mode; set a number");
        const auto& valid = corpus->splits.valid;
        if (valid.empty() || !corpus->has_gold(valid))
            throw ConfigError("percentile tuning needs a gold-labeled validation split");
        SessionConfig pilot_cfg = config;
        pilot_cfg.refinement.enabled = false;
        Session pilot(corpus, pilot_cfg);
        pilot.run();
        std::vector<double> grid = config.refinement.grid;
        std::sort(grid.begin(), grid.end());
        double best_p = grid.back(), best = -1.0;
        for (double p : grid) {
            std::vector<RefinedLf> refined;
            for (const auto& lf : pilot.lfs())
                refined.push_back(refine_lf(lf, refinement_radius(lf, *corpus, p, config.refinement.distance),
                                            *corpus, pilot.index(), config.refinement.distance));
            double acc = soft_label_accuracy(refined, *corpus, config);
            if (scores) scores->push_back({p, acc});
            if (acc >= best) {
                best = acc;
                best_p = p;
            }
        }
        return best_p;
    }

    static double soft_label_accuracy(const std::vector<RefinedLf>& refined, const Corpus& corpus,
                                      const SessionConfig& config) {
        const auto& valid = corpus.splits.valid;
        if (refined.empty()) return 0.5;
        std::vector<VoteColumn> cols;
        for (const auto& r : refined) cols.push_back({r.lf.label, &r.retained});
        auto train_m = build_label_matrix(cols, corpus.splits.train);
        auto fit = fit_label_model(train_m, config.label_model);
        auto valid_m = refined_label_matrix(refined, corpus, valid, config.refinement.distance);
        auto post = apply_label_model(fit, valid_m, config.label_model);
        double hits = 0.0;
        for (std::size_t r = 0; r < post.size(); ++r) {
            const Label g = *corpus.examples[valid[r]].gold;
            if (!post.covered[r] || post.p_pos[r] == post.p_neg[r]) {
                hits += 0.5;
            } else if ((post.p_pos[r] > post.p_neg[r]) == (g == Label::positive)) {
                hits += 1.0;
            }
        }
        return hits / static_cast<double>(valid.size());
    }

  private:
    void add_lf(const LabelingFunction& lf) {
        lfs_.push_back(lf);
        if (percentile_) {
            const auto kind = config_.refinement.distance;
            refined_.push_back(refine_lf(lf, refinement_radius(lf, *corpus_, *percentile_, kind), *corpus_,
                                         *index_, kind));
        } else {
            refined_.push_back(unrefined(lf, *index_));
        }
    }

    void refit_label_model() {
        std::vector<VoteColumn> cols;
        cols.reserve(refined_.size());
        for (const auto& r : refined_) cols.push_back({r.lf.label, &r.retained});
        matrix_ = build_label_matrix(cols, corpus_->splits.train);
        fit_ = fit_label_model(matrix_, config_.label_model);
        refresh_uncertainty();
    }

    void refresh_uncertainty() {
        std::fill(uncertainty_.begin(), uncertainty_.end(), 0.0);
        if (lfs_.empty()) {
            const double p = config_.label_model.prior_positive;
            const double h = binary_entropy(p, 1.0 - p);
            for (auto i : corpus_->splits.train) uncertainty_[i] = h;
            return;
        }
        const auto& post = fit_.posterior;
        for (std::size_t r = 0; r < post.size(); ++r) uncertainty_[post.rows[r]] = post.uncertainty[r];
    }

    void refit(std::vector<std::string>& warnings) {
        refit_label_model();
        for (const auto& w : fit_.warnings) warnings.push_back(w);
        auto data = soft_dataset(*corpus_, fit_.posterior);
        if (data.q.empty()) {
            warnings.push_back("untrainable: no covered training example; end model kept");
            return;
        }
        model_ = train(data, corpus_->feature_dim, config_.end_model);
        has_model_ = true;
        predictions_ = predict_all(model_, *corpus_);
    }

    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<PrimitiveIndex> index_;
    SessionConfig config_;
    std::optional<double> percentile_;
    bool tuned_ = false;
    std::vector<PercentileScore> tuning_scores_;
    bool metric_available_ = false;

    int iteration_ = 0;
    CandidatePool pool_;
    std::optional<ExampleId> pending_;
    bool last_fallback_ = false;
    std::vector<LabelingFunction> lfs_;
    std::vector<RefinedLf> refined_;
    std::vector<HistoryEntry> history_;
    std::vector<CurvePoint> curve_;

    LabelMatrix matrix_;
    LabelModelFit fit_;
    std::vector<double> uncertainty_;
    LinearModel model_;
    bool has_model_ = false;
    Predictions predictions_;
    ScoreObserver observer_;
};

inline json report_to_json(const IterationReport& r, const Session& s) {
    json j = {{"iteration", r.iteration},
              {"selected", r.selected},
              {"event", to_string(r.event)},
              {"coverage", r.coverage},
              {"n_lfs", r.n_lfs},
              {"pool_size", r.pool_size},
              {"fallback_random", r.fallback_random}};
    j["lf"] = r.lf ? s.lf_to_json(*r.lf) : json(nullptr);
    j["metric"] = r.metric ? json(*r.metric) : json(nullptr);
    j["warnings"] = r.warnings;
    return j;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& pts) {
    out << "iteration,metric\n";
    for (const auto& p : pts) out << p.iteration << ',' << detail::fmt_double(p.value) << '\n';
}

/// Parses a curve CSV written by write_curve_csv.
inline std::vector<CurvePoint> read_curve_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("iteration,", 0) != 0) throw Error("curve CSV lacks its header");
    std::vector<CurvePoint> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw Error("malformed curve CSV line '" + line + "'");
        try {
            pts.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw Error("malformed curve CSV line '" + line + "'");
        }
    }
    return pts;
}

}  // namespace idp
