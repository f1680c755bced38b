#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <idp/contextualizer.hpp>
#include <idp/synthetic.hpp>

using namespace idp;

namespace {

// Points on a line: example i sits at x = pos[i]; all share primitive "pp",
// odd ones also carry "qq".
Corpus line_corpus(const std::vector<double>& pos, std::vector<int> labels = {}) {
    std::string s;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        nlohmann::json j{{"primitives", i % 2 ? std::vector<std::string>{"pp", "qq"} : std::vector<std::string>{"pp"}},
                         {"features", {pos[i], 1.0}}};
        if (!labels.empty()) j["label"] = labels[i];
        s += j.dump() + "\n";
    }
    return ingest_string(s, DataFormat::primitive_jsonl, IngestConfig{0, {1.0, 0.0, 0.0}, 2});
}

}  // namespace

TEST(NearestRank, HandValues) {
    std::vector<double> d{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    EXPECT_EQ(nearest_rank(d, 30), 3.0);
    EXPECT_EQ(nearest_rank(d, 100), 10.0);
    EXPECT_EQ(nearest_rank(d, 25), 3.0);  // ceil(2.5) = 3rd value
    EXPECT_EQ(nearest_rank(d, 0.001), 1.0);
    EXPECT_EQ(nearest_rank(std::vector<double>(7, 2.5), 40), 2.5);
}

TEST(Radius, FromLineageOverTrain) {
    // lineage at 0; train distances 0..9
    auto c = line_corpus({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    LabelingFunction lf{*c.find_primitive("pp"), Label::positive, 0, 1};
    EXPECT_EQ(refinement_radius(lf, c, 30, DistanceKind::euclidean), 2.0);  // values 0..9, 3rd
    EXPECT_EQ(refinement_radius(lf, c, 100, DistanceKind::euclidean), 9.0);
}

TEST(Refine, ThresholdScan) {
    auto c = line_corpus({0, 0.1, 0.4, 0.7, 0.9});
    auto idx = build_primitive_index(c);
    LabelingFunction lf{*c.find_primitive("pp"), Label::positive, 0, 1};
    auto r = refine_lf(lf, 0.5, c, idx, DistanceKind::euclidean);
    EXPECT_EQ(r.retained, (std::vector<ExampleId>{0, 1, 2}));
    auto zero = refine_lf(lf, 0.0, c, idx, DistanceKind::euclidean);
    EXPECT_EQ(zero.retained, (std::vector<ExampleId>{0}));
    auto full = refine_lf(lf, refinement_radius(lf, c, 100, DistanceKind::euclidean), c, idx, DistanceKind::euclidean);
    EXPECT_EQ(full.retained, idx[lf.primitive]);
}

TEST(Refine, SubsetAndMonotoneInRadius) {
    auto c = ingest_string(synthetic::keyword_corpus(12, {.n = 400, .keywords = 40, .min_fillers = 1}), DataFormat::text_jsonl, {12});
    auto idx = build_primitive_index(c);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        ExampleId x = c.splits.train[rng() % c.splits.train.size()];
        const auto& ex = c.examples[x];
        LabelingFunction lf{ex.primitives[rng() % ex.primitives.size()], Label::positive, x, 1};
        std::vector<ExampleId> prev = idx[lf.primitive];
        for (double p : {100.0, 75.0, 50.0, 25.0, 5.0}) {
            auto r1 = refinement_radius(lf, c, p, DistanceKind::cosine);
            EXPECT_EQ(r1, refinement_radius(lf, c, p, DistanceKind::cosine));
            auto r = refine_lf(lf, r1, c, idx, DistanceKind::cosine);
            EXPECT_TRUE(std::includes(prev.begin(), prev.end(), r.retained.begin(), r.retained.end()));
            EXPECT_TRUE(std::binary_search(r.retained.begin(), r.retained.end(), x));
            prev = r.retained;
        }
    }
}

TEST(Refine, MatrixOnOtherRowsAgreesWithRetained) {
    auto c = ingest_string(synthetic::keyword_corpus(13, {.n = 300, .keywords = 40, .min_fillers = 1}), DataFormat::text_jsonl, {13});
    auto idx = build_primitive_index(c);
    ExampleId x = c.splits.train[3];
    LabelingFunction lf{c.examples[x].primitives[0], Label::negative, x, 1};
    auto r = refine_lf(lf, refinement_radius(lf, c, 50, DistanceKind::cosine), c, idx, DistanceKind::cosine);
    std::vector<RefinedLf> lfs{r};
    auto m = refined_label_matrix(lfs, c, c.splits.train, DistanceKind::cosine);
    std::vector<VoteColumn> cols{{lf.label, &lfs[0].retained}};
    EXPECT_EQ(m, build_label_matrix(cols, c.splits.train));
}

TEST(Locality, ConstantAccuracyAndBucketSizes) {
    auto c = line_corpus({0, 1, 2, 3, 4, 5, 6, 7, 8}, {1, 1, 1, 1, 1, 1, 1, 1, 1});
    std::vector<LabelingFunction> lfs{{*c.find_primitive("pp"), Label::positive, 4, 1}};
    auto rep = locality_report(lfs, c, DistanceKind::euclidean);
    ASSERT_EQ(rep.cells.size(), 4u);
    for (const auto& cell : rep.cells) {
        EXPECT_EQ(cell.accuracy, 1.0);
        EXPECT_EQ(cell.coverage, 1.0);
    }
    for (double a : rep.mean_accuracy) EXPECT_EQ(a, 1.0);
    // bucket sizes 2,2,2,3 differ by at most one
    std::size_t n = c.splits.train.size();
    for (int b = 0; b < 4; ++b) {
        auto sz = n * (b + 1) / 4 - n * b / 4;
        EXPECT_TRUE(sz == n / 4 || sz == n / 4 + 1);
    }
    EXPECT_THROW(locality_report(lfs, line_corpus({0, 1, 2}, {1, 1, 1}), DistanceKind::euclidean), Error);
}

TEST(Locality, CsvLayout) {
    auto c = line_corpus({0, 1, 2, 3, 4, 5, 6, 7}, {1, -1, 1, -1, 1, -1, 1, -1});
    std::vector<LabelingFunction> lfs{{*c.find_primitive("qq"), Label::negative, 1, 1}};
    std::ostringstream out;
    write_locality_csv(out, locality_report(lfs, c, DistanceKind::euclidean));
    std::string s = out.str();
    EXPECT_EQ(s.rfind("lf_id,quartile,coverage,accuracy\n", 0), 0u);
    EXPECT_NE(s.find("\nmean,4,"), std::string::npos);
}

TEST(Locality, DecayingCorpusTrend) {
    auto c = ingest_string(synthetic::ring_corpus(21), DataFormat::primitive_jsonl, {21});
    auto idx = build_primitive_index(c);
    std::vector<LabelingFunction> lfs;
    for (std::size_t k = 0; k < 40; ++k) {
        ExampleId x = c.splits.train[k * 31 % c.splits.train.size()];
        lfs.push_back({c.examples[x].primitives[0], *c.examples[x].gold, x, static_cast<int>(k)});
    }
    auto rep = locality_report(lfs, c, DistanceKind::euclidean);
    for (int b = 1; b < 4; ++b) EXPECT_LE(rep.mean_accuracy[b], rep.mean_accuracy[b - 1]);
}
