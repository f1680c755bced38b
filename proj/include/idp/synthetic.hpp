#pragma once

// Generators for planted-structure corpora used by tests, the acceptance
// suite and `idp generate`. Each returns JSONL text ready for ingest().

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace idp::synthetic {

namespace detail {
inline std::string word(char prefix, std::size_t k, int width = 3) {
    std::string digits = std::to_string(k);
    if (digits.size() < static_cast<std::size_t>(width)) digits.insert(0, width - digits.size(), '0');
    return std::string(1, prefix) + digits;
}
inline std::string join_jsonl(const std::vector<nlohmann::json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}
}  // namespace detail

/// Documents mixing label-correlated keywords with neutral filler words.
/// Keyword k has polarity +-1 and correlation c_k: it is drawn for a document
/// of its own polarity with weight f_k c_k and for the other with f_k (1-c_k),
/// f_k following a shuffled Zipf profile.
struct KeywordSpec {
    std::size_t n = 2000;
    std::size_t vocabulary = 300;
    std::size_t keywords = 150;
    double corr_lo = 0.6, corr_hi = 0.95;
    std::size_t min_keywords = 1, max_keywords = 3;  // per document, inclusive
    std::size_t min_fillers = 0, max_fillers = 3;
    double zipf = 0.8;
};

inline std::string keyword_corpus(std::uint64_t seed, const KeywordSpec& spec = {}) {
    auto rng = make_rng(seed, Stream::synthetic, 1);
    std::vector<std::size_t> perm(spec.vocabulary);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t K = spec.keywords;
    std::vector<int> polarity(K);
    std::vector<double> corr(K), freq(K);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
        polarity[k] = k % 2 == 0 ? 1 : -1;
        corr[k] = spec.corr_lo + (spec.corr_hi - spec.corr_lo) * u01(rng);
        freq[k] = 1.0 / std::pow(static_cast<double>(k + 1), spec.zipf);
    }
    std::shuffle(freq.begin(), freq.end(), rng);
    std::vector<double> wpos(K), wneg(K);
    for (std::size_t k = 0; k < K; ++k) {
        wpos[k] = freq[k] * (polarity[k] == 1 ? corr[k] : 1.0 - corr[k]);
        wneg[k] = freq[k] * (polarity[k] == -1 ? corr[k] : 1.0 - corr[k]);
    }
    std::discrete_distribution<std::size_t> dpos(wpos.begin(), wpos.end()), dneg(wneg.begin(), wneg.end());
    std::uniform_int_distribution<std::size_t> nk(spec.min_keywords, spec.max_keywords);
    std::uniform_int_distribution<std::size_t> nf(spec.min_fillers, spec.max_fillers);
    std::uniform_int_distribution<std::size_t> filler(K, spec.vocabulary - 1);

    std::vector<nlohmann::json> rows;
    rows.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        int y = u01(rng) < 0.5 ? 1 : -1;
        std::string text;
        auto add = [&](std::size_t w) {
            if (!text.empty()) text += ' ';
            text += detail::word('w', perm[w]);
        };
        std::size_t a = nk(rng), b = nf(rng);
        for (std::size_t t = 0; t < a; ++t) add(y == 1 ? dpos(rng) : dneg(rng));
        for (std::size_t t = 0; t < b; ++t) add(filler(rng));
        rows.push_back({{"text", text}, {"label", y}});
    }
    return detail::join_jsonl(rows);
}

/// Four topical clusters of sizes 40/40/10/10 with labels +1/-1/+1/-1. Every
/// document of cluster c contains its anchor word (cNw0) and one or two more
/// words of the cluster vocabulary. With shared_words > 0 each document also
/// draws one word from a pool common to all clusters.
struct ClusterSpec {
    std::vector<std::size_t> sizes{40, 40, 10, 10};
    std::vector<int> labels{1, -1, 1, -1};
    std::size_t cluster_words = 6;
    std::size_t shared_words = 0;  // words drawn across all clusters
};

inline std::string cluster_word(std::size_t cluster, std::size_t k) {
    return "c" + std::to_string(cluster) + "w" + std::to_string(k);
}

inline std::string cluster_corpus(std::uint64_t seed, const ClusterSpec& spec = {}) {
    auto rng = make_rng(seed, Stream::synthetic, 2);
    std::uniform_int_distribution<std::size_t> extra(1, 2);
    std::uniform_int_distribution<std::size_t> own(1, spec.cluster_words - 1);
    std::uniform_int_distribution<std::size_t> shared(0, spec.shared_words ? spec.shared_words - 1 : 0);
    std::vector<nlohmann::json> rows;
    for (std::size_t c = 0; c < spec.sizes.size(); ++c) {
        for (std::size_t i = 0; i < spec.sizes[c]; ++i) {
            std::string text = cluster_word(c, 0);
            std::size_t m = extra(rng);
            for (std::size_t t = 0; t < m; ++t) text += ' ' + cluster_word(c, own(rng));
            if (spec.shared_words) text += " shared" + std::to_string(shared(rng));
            rows.push_back({{"text", text}, {"label", spec.labels[c]}, {"cluster", c}});
        }
    }
    return detail::join_jsonl(rows);
}

/// Points on a ring with a smooth label field y ~ Bernoulli(sigmoid(steep
/// sin theta)). Keyword k has a home angle; drawn within near_radius of home it
/// agrees with y at `near_accuracy`, elsewhere at 0.5 (or, when graded, falling
/// linearly to 0.5 at the antipode). Features are the 2-D position (scaled) followed by normalized
/// keyword indicators, so euclidean distance tracks angular distance.
struct RingSpec {
    std::size_t n = 2000;
    std::size_t keywords = 48;
    std::size_t per_doc = 3;  // draws with replacement
    double scale = 2.0;
    double steep = 3.0;
    double near_accuracy = 0.9;
    double near_radius = std::numbers::pi / 4;
    bool graded = false;  // false: 0.5 beyond near_radius; true: linear decay to 0.5 at the antipode
};

inline std::string ring_corpus(std::uint64_t seed, const RingSpec& spec = {}) {
    using std::numbers::pi;
    auto rng = make_rng(seed, Stream::synthetic, 3);
    const std::size_t K = spec.keywords;
    std::vector<double> home(K);
    std::vector<int> polarity(K);
    for (std::size_t k = 0; k < K; ++k) {
        home[k] = 2.0 * pi * static_cast<double>(k) / static_cast<double>(K);
        polarity[k] = k % 2 == 0 ? 1 : -1;
    }
    std::shuffle(polarity.begin(), polarity.end(), rng);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * pi), u01(0.0, 1.0);
    std::vector<nlohmann::json> rows;
    rows.reserve(spec.n);
    std::vector<double> w(K);
    for (std::size_t i = 0; i < spec.n; ++i) {
        double th = angle(rng);
        int y = u01(rng) < 1.0 / (1.0 + std::exp(-spec.steep * std::sin(th))) ? 1 : -1;
        for (std::size_t k = 0; k < K; ++k) {
            double d = std::abs(std::remainder(home[k] - th, 2.0 * pi));  // in [0, pi]
            double acc = spec.near_accuracy;
            if (d > spec.near_radius)
                acc = spec.graded ? spec.near_accuracy - (spec.near_accuracy - 0.5) * (d - spec.near_radius) /
                                                             (pi - spec.near_radius)
                                  : 0.5;
            w[k] = polarity[k] == y ? acc : 1.0 - acc;
        }
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        std::vector<std::size_t> ks;
        for (std::size_t t = 0; t < spec.per_doc; ++t) ks.push_back(pick(rng));
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        std::vector<std::string> prims;
        std::vector<double> feats{spec.scale * std::cos(th), spec.scale * std::sin(th)};
        feats.resize(2 + K, 0.0);
        const double v = 1.0 / std::sqrt(static_cast<double>(ks.size()));
        for (auto k : ks) {
            prims.push_back(detail::word('k', k, 2));
            feats[2 + k] = v;
        }
        rows.push_back({{"primitives", prims}, {"features", feats}, {"label", y}});
    }
    return detail::join_jsonl(rows);
}

}  // namespace idp::synthetic
