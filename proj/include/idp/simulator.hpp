#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lf.hpp"

namespace idp {

enum class EmptyBehavior { skip, best_effort };

inline EmptyBehavior parse_empty_behavior(const std::string& s) {
    if (s == "skip") return EmptyBehavior::skip;
    if (s == "best-effort") return EmptyBehavior::best_effort;
    throw ConfigError("unknown simulator.empty_behavior '" + s + "'");
}
inline std::string to_string(EmptyBehavior e) { return e == EmptyBehavior::skip ? "skip" : "best-effort"; }

struct SimulatorConfig {
    double threshold = 0.5;
    EmptyBehavior empty_behavior = EmptyBehavior::skip;

    void validate() const {
        if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("simulator.threshold must lie in [0, 1]");
    }
};

struct CandidateAccuracy {
    PrimitiveId primitive;
    double accuracy;
};

/// Gold agreement of lambda_{z,y} over its gold-labeled train coverage.
inline double true_accuracy(PrimitiveId z, Label y, const Corpus& corpus, const PrimitiveIndex& index) {
    std::size_t labeled = 0, agree = 0;
    for (auto i : index[z]) {
        const auto& g = corpus.examples[i].gold;
        if (!g) continue;
        ++labeled;
        if (*g == y) ++agree;
    }
    return labeled ? static_cast<double>(agree) / static_cast<double>(labeled) : 0.0;
}

struct SimulatedResponse {
    std::optional<LabelingFunction> lf;  // nullopt: skip
    std::vector<CandidateAccuracy> candidates;
    std::size_t survivors = 0;
};

/// The simulated user looks at x, takes its gold label y, keeps the LFs
/// lambda_{z,y} (z in x) whose true accuracy reaches the threshold and picks
/// one of them uniformly.
inline SimulatedResponse simulate_response(const Example& x, const Corpus& corpus, const PrimitiveIndex& index,
                                           const SimulatorConfig& cfg, std::uint64_t seed,
                                           std::uint64_t iteration) {
    if (!x.gold) throw Error("simulator requires gold labels (example " + std::to_string(x.id) + ")");
    const Label y = *x.gold;
    SimulatedResponse res;
    std::vector<PrimitiveId> survivors;
    for (auto z : x.primitives) {
        double a = true_accuracy(z, y, corpus, index);
        res.candidates.push_back({z, a});
        if (a >= cfg.threshold) survivors.push_back(z);
    }
    res.survivors = survivors.size();
    auto make = [&](PrimitiveId z) { return LabelingFunction{z, y, x.id, static_cast<int>(iteration)}; };
    if (!survivors.empty()) {
        auto rng = make_rng(seed, Stream::simulate, iteration);
        res.lf = make(survivors[uniform_index(rng, survivors.size())]);
    } else if (cfg.empty_behavior == EmptyBehavior::best_effort && !res.candidates.empty()) {
        const CandidateAccuracy* best = &res.candidates.front();
        for (const auto& c : res.candidates)
            if (c.accuracy > best->accuracy) best = &c;
        res.lf = make(best->primitive);
    }
    return res;
}

}  // namespace idp
