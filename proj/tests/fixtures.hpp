#pragma once

#include <memory>
#include <string>

#include <idp/label_model.hpp>
#include <idp/selection.hpp>
#include <idp/synthetic.hpp>

namespace idp::fixture {

/// Four-cluster corpus with LFs on the anchors of the two large clusters, a
/// confident label model and an end model that predicts the gold labels.
struct Clusters {
    std::shared_ptr<const Corpus> corpus;
    PrimitiveIndex index;
    std::vector<LabelingFunction> lfs;
    LabelMatrix matrix;
    std::vector<double> psi;
    Predictions predictions;
    std::vector<int> cluster;  // by example id

    SelectionContext context(std::uint64_t seed, std::uint64_t iteration) const {
        SelectionContext ctx;
        ctx.corpus = corpus.get();
        ctx.index = &index;
        ctx.lfs = lfs;
        ctx.matrix = &matrix;
        ctx.uncertainty = &psi;
        ctx.predictions = &predictions;
        ctx.seed = seed;
        ctx.iteration = iteration;
        return ctx;
    }
    bool covered_cluster(ExampleId i) const { return cluster[i] < 2; }
};

inline Clusters clusters(std::uint64_t seed) {
    Clusters f;
    f.corpus = std::make_shared<const Corpus>(
        ingest_string(synthetic::cluster_corpus(seed), DataFormat::text_jsonl, IngestConfig{seed}));
    const auto& c = *f.corpus;
    f.index = build_primitive_index(c);
    for (const auto& x : c.examples) {
        int k = -1;
        for (auto z : x.primitives) {
            const auto& n = c.primitive_name(z);
            if (n[0] == 'c') k = n[1] - '0';
        }
        f.cluster.push_back(k);
    }
    for (int k = 0; k < 2; ++k) {
        auto anchor = *c.find_primitive(synthetic::cluster_word(static_cast<std::size_t>(k), 0));
        const auto& post = f.index[anchor];
        f.lfs.push_back({anchor, k == 0 ? Label::positive : Label::negative, post.front(), k + 1});
    }
    f.matrix = build_label_matrix(f.lfs, c, c.splits.train);
    LabelModelConfig lm;
    lm.smoothing = 0.01;
    auto post = fit_posterior(f.matrix, lm);
    f.psi.assign(c.size(), 0.0);
    for (std::size_t r = 0; r < post.size(); ++r) f.psi[post.rows[r]] = post.uncertainty[r];
    for (const auto& x : c.examples) f.predictions.push_back(*x.gold);
    return f;
}

}  // namespace idp::fixture
