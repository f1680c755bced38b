#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include <idp/corpus.hpp>
#include <idp/synthetic.hpp>

using namespace idp;

namespace {

IngestConfig all_train(std::size_t min_len = 2) { return IngestConfig{0, {1.0, 0.0, 0.0}, min_len}; }

std::string text_lines(const std::vector<std::string>& texts) {
    std::string s;
    for (const auto& t : texts) s += nlohmann::json{{"text", t}, {"label", 1}}.dump() + "\n";
    return s;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplits) {
    EXPECT_EQ(tokenize("Good good movie"), (std::vector<std::string>{"good", "good", "movie"}));
    EXPECT_EQ(tokenize("a, bc!DE-f  gh9"), (std::vector<std::string>{"bc", "de", "gh9"}));
    EXPECT_EQ(tokenize("a b", 1), (std::vector<std::string>{"a", "b"}));
}

TEST(Ingest, SplitSizesFollowRatios) {
    std::vector<std::string> t;
    for (int i = 0; i < 10; ++i) t.push_back("word" + std::to_string(i) + " common");
    auto c = ingest_string(text_lines(t), DataFormat::text_jsonl, IngestConfig{});
    EXPECT_EQ(c.splits.train.size(), 8u);
    EXPECT_EQ(c.splits.valid.size(), 1u);
    EXPECT_EQ(c.splits.test.size(), 1u);
    std::set<ExampleId> all;
    for (const auto* s : {&c.splits.train, &c.splits.valid, &c.splits.test}) all.insert(s->begin(), s->end());
    EXPECT_EQ(all.size(), 10u);
}

TEST(Ingest, PrimitivesAreCaseFoldedSets) {
    auto c = ingest_string(R"({"text":"Good good movie"})" "\n", DataFormat::text_jsonl, all_train());
    ASSERT_EQ(c.size(), 1u);
    std::set<std::string> names;
    for (auto z : c.examples[0].primitives) names.insert(c.primitive_name(z));
    EXPECT_EQ(names, (std::set<std::string>{"good", "movie"}));
    EXPECT_FALSE(c.examples[0].gold.has_value());
}

TEST(Ingest, Deterministic) {
    auto data = synthetic::keyword_corpus(3, {.n = 200, .keywords = 40, .min_fillers = 1});
    auto a = ingest_string(data, DataFormat::text_jsonl, {7});
    auto b = ingest_string(data, DataFormat::text_jsonl, {7});
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    EXPECT_EQ(a.splits.train, b.splits.train);
    auto c = ingest_string(data, DataFormat::text_jsonl, {8});
    EXPECT_NE(a.splits.train, c.splits.train);
}

TEST(Ingest, Errors) {
    EXPECT_THROW(ingest_string("", DataFormat::text_jsonl, {}), IngestError);
    try {
        ingest_string("{\"text\":\"ok fine\"}\n{broken\n", DataFormat::text_jsonl, all_train());
        FAIL();
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(ingest_string(R"({"text":"aa bb","label":0})", DataFormat::text_jsonl, all_train()), IngestError);
    EXPECT_THROW(ingest_string(R"({"text":"aa bb","label":2})", DataFormat::text_jsonl, all_train()), IngestError);
    EXPECT_THROW(ingest_string(R"({"txt":"aa"})", DataFormat::text_jsonl, all_train()), IngestError);
    EXPECT_THROW(ingest_string(R"({"primitives":["a"]})", DataFormat::primitive_jsonl, all_train()), IngestError);
    EXPECT_THROW(ingest_string(R"({"primitives":["a"],"features":[0,0]})", DataFormat::primitive_jsonl, all_train()),
                 IngestError);
    // one-character tokens are dropped, leaving nothing to featurize
    EXPECT_THROW(ingest_string(R"({"text":"a b"})", DataFormat::text_jsonl, all_train()), IngestError);
}

TEST(Ingest, PrimitiveJsonlKeepsFeatures) {
    auto c = ingest_string(R"({"primitives":["car","dog"],"features":[0.5,0,2],"label":-1})" "\n",
                           DataFormat::primitive_jsonl, all_train());
    EXPECT_EQ(c.feature_dim, 3u);
    EXPECT_EQ(c.examples[0].features.index, (std::vector<std::uint32_t>{0, 2}));
    EXPECT_EQ(c.examples[0].features.value, (std::vector<double>{0.5, 2.0}));
    EXPECT_EQ(c.examples[0].gold, Label::negative);
}

TEST(Featurize, SingleDocSymmetric) {
    auto c = ingest_string(R"({"text":"aa bb"})", DataFormat::text_jsonl, all_train());
    const auto& f = c.examples[0].features;
    ASSERT_EQ(f.nnz(), 2u);
    EXPECT_DOUBLE_EQ(f.value[0], 1.0 / std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(f.value[1], 1.0 / std::sqrt(2.0));
}

TEST(Featurize, HandComputedTfIdf) {
    auto c = ingest_string(text_lines({"aa aa bb", "bb"}), DataFormat::text_jsonl, all_train());
    // n=2, df(aa)=1, df(bb)=2: idf(aa)=ln(3/2)+1, idf(bb)=1; tf(aa)=2.
    const double w_aa = 2.0 * (std::log(1.5) + 1.0), w_bb = 1.0;
    const double norm = std::sqrt(w_aa * w_aa + w_bb * w_bb);
    auto aa = *c.find_primitive("aa");
    const auto& f = c.examples[0].features;
    ASSERT_EQ(f.index[0], aa);
    EXPECT_NEAR(f.value[0], w_aa / norm, 1e-15);
    EXPECT_NEAR(f.value[0], 0.9421556246632359, 1e-12);
    EXPECT_NEAR(f.value[1], 0.33517574332792605, 1e-12);
}

TEST(Featurize, TestOnlyTokenContributesNothing) {
    // With seed 0 and 3 docs at (2/3, 0, 1/3) one doc is test; make every doc
    // share "base" and give each a private token.
    std::string data = text_lines({"base one1", "base two2", "base three3"});
    IngestConfig cfg{0, {2.0 / 3.0, 0.0, 1.0 / 3.0}, 2};
    auto c = ingest_string(data, DataFormat::text_jsonl, cfg);
    ASSERT_EQ(c.splits.test.size(), 1u);
    const auto& t = c.examples[c.splits.test[0]];
    ASSERT_EQ(t.features.nnz(), 1u);
    EXPECT_EQ(c.primitive_name(t.features.index[0]), "base");
    EXPECT_DOUBLE_EQ(t.features.value[0], 1.0);
    EXPECT_EQ(t.primitives.size(), 2u);  // still a primitive, just not a feature
}

TEST(Featurize, TestDocumentsDoNotMoveTrainFeatures) {
    auto data = synthetic::keyword_corpus(5, {.n = 120, .keywords = 40, .min_fillers = 1});
    auto a = ingest_string(data, DataFormat::text_jsonl, {1});
    // Rewrite every test document; train vectors (by token name) must not change.
    std::vector<std::string> lines;
    std::istringstream in(data);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    for (auto i : a.splits.test) lines[i] = R"({"text":"w000 w001 zzunseen","label":1})";
    std::string edited;
    for (auto& l : lines) edited += l + "\n";
    auto b = ingest_string(edited, DataFormat::text_jsonl, {1});
    ASSERT_EQ(a.splits.train, b.splits.train);
    for (auto i : a.splits.train) {
        const auto& fa = a.examples[i].features;
        const auto& fb = b.examples[i].features;
        ASSERT_EQ(fa.nnz(), fb.nnz());
        for (std::size_t k = 0; k < fa.nnz(); ++k) {
            EXPECT_EQ(a.primitive_name(fa.index[k]), b.primitive_name(fb.index[k]));
            EXPECT_EQ(fa.value[k], fb.value[k]);
        }
    }
}

TEST(Distance, Basics) {
    SparseVector a{{0}, {1.0}}, b{{1}, {1.0}}, c{{0, 1}, {0.3, 0.7}};
    EXPECT_EQ(distance(c, c, DistanceKind::cosine), 0.0);
    EXPECT_EQ(distance(c, c, DistanceKind::euclidean), 0.0);
    EXPECT_DOUBLE_EQ(distance(a, b, DistanceKind::cosine), 1.0);
    EXPECT_NEAR(distance(a, b, DistanceKind::euclidean), 1.41421356237, 1e-10);
    EXPECT_DOUBLE_EQ(distance(a, c, DistanceKind::euclidean), distance(c, a, DistanceKind::euclidean));
    EXPECT_THROW(distance(SparseVector{}, a, DistanceKind::cosine), Error);
}

TEST(Distance, IdenticalTfIdfVectorsAreZero) {
    auto c = ingest_string(synthetic::keyword_corpus(2, {.n = 100, .keywords = 40, .min_fillers = 1}), DataFormat::text_jsonl, {0});
    for (const auto& x : c.examples) EXPECT_EQ(distance(x.features, x.features, DistanceKind::cosine), 0.0);
}

TEST(Distance, TriangleInequality) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    auto rnd = [&] {
        SparseVector v;
        for (std::uint32_t k = 0; k < 6; ++k)
            if (rng() % 2) {
                v.index.push_back(k);
                v.value.push_back(g(rng));
            }
        return v;
    };
    for (int t = 0; t < 500; ++t) {
        auto a = rnd(), b = rnd(), c = rnd();
        double ab = distance(a, b, DistanceKind::euclidean), bc = distance(b, c, DistanceKind::euclidean),
               ac = distance(a, c, DistanceKind::euclidean);
        EXPECT_LE(ac, ab + bc + 1e-12);
    }
}

TEST(PrimitiveIndex, SmallInversion) {
    auto c = ingest_string(text_lines({"aa bb", "bb bb"}), DataFormat::text_jsonl, all_train());
    auto idx = build_primitive_index(c);
    EXPECT_EQ(idx[*c.find_primitive("aa")], (std::vector<ExampleId>{0}));
    EXPECT_EQ(idx[*c.find_primitive("bb")], (std::vector<ExampleId>{0, 1}));
}

TEST(PrimitiveIndex, ExhaustiveMembership) {
    auto c = ingest_string(synthetic::keyword_corpus(4, {.n = 1000, .keywords = 40, .min_fillers = 1}), DataFormat::text_jsonl, {4});
    auto idx = build_primitive_index(c);
    std::vector<char> in_train(c.size(), 0);
    for (auto i : c.splits.train) in_train[i] = 1;
    for (PrimitiveId z = 0; z < c.primitive_names.size(); ++z) {
        std::set<ExampleId> post(idx[z].begin(), idx[z].end());
        EXPECT_EQ(post.size(), idx[z].size());
        for (const auto& x : c.examples) {
            bool expect = in_train[x.id] && x.contains(z);
            ASSERT_EQ(post.count(x.id) == 1, expect) << "z=" << z << " x=" << x.id;
        }
    }
}

TEST(Corpus, DomainIsUnionOfPrimitives) {
    auto c = ingest_string(synthetic::keyword_corpus(6, {.n = 300, .keywords = 40, .min_fillers = 1}), DataFormat::text_jsonl, {6});
    std::vector<char> seen(c.primitive_names.size(), 0);
    for (const auto& x : c.examples)
        for (auto z : x.primitives) seen[z] = 1;
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](char s) { return s; }));
    EXPECT_TRUE(std::is_sorted(c.primitive_names.begin(), c.primitive_names.end()));
}
