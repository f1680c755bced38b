#include <gtest/gtest.h>

#include <sstream>

#include <idp/idp.hpp>

using namespace idp;

namespace {

std::shared_ptr<const Corpus> small_keywords(std::uint64_t seed) {
    synthetic::KeywordSpec spec;
    spec.n = 300;
    spec.keywords = 60;
    return std::make_shared<const Corpus>(
        ingest_string(synthetic::keyword_corpus(seed, spec), DataFormat::text_jsonl, IngestConfig{seed}));
}

SessionConfig short_config(std::uint64_t seed, int iterations = 12) {
    SessionConfig c;
    c.seed = seed;
    c.iterations = iterations;
    c.eval_every = 3;
    c.end_model.epochs = 100;
    return c;
}

std::string curve_csv(const Session& s) {
    std::ostringstream o;
    write_curve_csv(o, s.curve());
    return o.str();
}

}  // namespace

TEST(Session, ProtocolErrors) {
    auto c = small_keywords(1);
    auto cfg = short_config(1);
    cfg.mode = SessionMode::human;
    Session s(c, cfg);
    EXPECT_THROW(s.submit(std::nullopt), StateError);
    auto x = s.next();
    ASSERT_TRUE(x);
    EXPECT_THROW(s.next(), StateError);
    EXPECT_THROW(s.step(), StateError);
    PrimitiveId absent = 0;
    while (c->examples[*x].contains(absent)) ++absent;
    EXPECT_THROW(s.submit(std::make_pair(absent, Label::positive)), InvalidSubmission);
    EXPECT_EQ(s.pending(), x);  // a rejected answer leaves the example pending
    auto rep = s.submit(std::make_pair(c->examples[*x].primitives[0], Label::positive));
    EXPECT_EQ(rep.event, Event::created);
    EXPECT_EQ(rep.selected, *x);
    EXPECT_FALSE(s.pool().contains(*x));
    EXPECT_EQ(s.pool().size(), c->splits.train.size() - 1);
    EXPECT_TRUE(s.has_model());
}

TEST(Session, DuplicateAndSkip) {
    auto c = small_keywords(2);
    auto cfg = short_config(2);
    cfg.mode = SessionMode::human;
    Session s(c, cfg);
    auto x = *s.next();
    auto z = c->examples[x].primitives[0];
    s.submit(std::make_pair(z, Label::negative));
    auto weights = s.model().weights;
    // find another example containing z
    ExampleId other = x;
    for (auto i : s.index()[z])
        if (i != x) other = i;
    ASSERT_NE(other, x);
    // drive selection until the pending example holds z; skip the others
    int guard = 0;
    while (true) {
        auto y = *s.next();
        if (c->examples[y].contains(z)) {
            auto rep = s.submit(std::make_pair(z, Label::negative));
            EXPECT_EQ(rep.event, Event::duplicate);
            EXPECT_EQ(rep.n_lfs, 1u);
            EXPECT_FALSE(rep.warnings.empty());
            break;
        }
        auto rep = s.submit(std::nullopt);
        EXPECT_EQ(rep.event, Event::skip);
        ASSERT_LT(++guard, 400);
    }
    EXPECT_EQ(s.lfs().size(), 1u);
    EXPECT_EQ(s.model().weights, weights);
}

TEST(Session, CurveCadenceAndZeroModel) {
    auto c = small_keywords(3);
    Session s(c, short_config(3, 9));
    auto sum = s.run();
    ASSERT_EQ(sum.points.size(), 3u);
    EXPECT_EQ(sum.points[0].iteration, 3);
    EXPECT_EQ(sum.points[2].iteration, 9);
    EXPECT_NEAR(sum.mean, (sum.points[0].value + sum.points[1].value + sum.points[2].value) / 3.0, 1e-15);

    // zero model predicts +1 everywhere
    auto z = zero_model(c->feature_dim);
    double pos = 0;
    for (auto i : c->splits.test) pos += *c->examples[i].gold == Label::positive;
    EXPECT_DOUBLE_EQ(evaluate(z, *c, c->splits.test, Metric::accuracy), pos / static_cast<double>(c->splits.test.size()));
}

TEST(Session, PoolExhaustionTruncates) {
    std::string data;
    for (int i = 0; i < 10; ++i)
        data += nlohmann::json{{"text", "aa bb w" + std::to_string(i % 3)}, {"label", i % 2 ? 1 : -1}}.dump() + "\n";
    auto c = std::make_shared<const Corpus>(ingest_string(data, DataFormat::text_jsonl, IngestConfig{1}));
    auto cfg = short_config(1, 50);
    cfg.eval_every = 1;
    Session s(c, cfg);
    auto sum = s.run();
    EXPECT_TRUE(sum.truncated);
    EXPECT_EQ(s.iteration(), static_cast<int>(c->splits.train.size()));
    EXPECT_TRUE(s.complete());
    EXPECT_FALSE(s.next().has_value());
}

TEST(Session, DeterministicRuns) {
    auto c = small_keywords(4);
    for (auto kind : {SelectorKind::random, SelectorKind::abstain, SelectorKind::disagree, SelectorKind::seu}) {
        auto cfg = short_config(4);
        cfg.selector.kind = kind;
        Session a(c, cfg), b(c, cfg);
        a.run();
        b.run();
        EXPECT_EQ(curve_csv(a), curve_csv(b));
        EXPECT_EQ(a.snapshot(), b.snapshot());
    }
}

TEST(Session, SnapshotRestoreContinuesIdentically) {
    auto c = small_keywords(5);
    auto cfg = short_config(5, 16);
    Session full(c, cfg);
    full.run();

    Session half(c, cfg);
    for (int i = 0; i < 7; ++i) half.step();
    auto snap = nlohmann::json::parse(half.snapshot().dump());
    auto restored = Session::restore(snap, c);
    EXPECT_EQ(restored.snapshot(), half.snapshot());
    restored.run();
    EXPECT_EQ(restored.snapshot(), full.snapshot());
    EXPECT_EQ(curve_csv(restored), curve_csv(full));
}

TEST(Session, RestoreWithPendingAndRefinement) {
    auto c = small_keywords(6);
    auto cfg = short_config(6);
    cfg.refinement.enabled = true;
    cfg.refinement.percentile = 50;
    Session s(c, cfg);
    for (int i = 0; i < 5; ++i) s.step();
    s.next();
    auto r = Session::restore(s.snapshot(), c);
    EXPECT_EQ(r.pending(), s.pending());
    ASSERT_EQ(r.refined_lfs().size(), s.refined_lfs().size());
    for (std::size_t k = 0; k < r.refined_lfs().size(); ++k)
        EXPECT_EQ(r.refined_lfs()[k].retained, s.refined_lfs()[k].retained);
    EXPECT_EQ(r.matrix(), s.matrix());
}

TEST(Session, RestoreRejectsBadSnapshots) {
    auto c = small_keywords(7);
    Session s(c, short_config(7));
    for (int i = 0; i < 3; ++i) s.step();
    auto good = s.snapshot();

    auto v = good;
    v["format_version"] = 2;
    EXPECT_THROW(Session::restore(v, c), RestoreError);
    EXPECT_THROW(Session::restore(good, small_keywords(8)), RestoreError);
    auto bad = good;
    bad["lfs"][0]["primitive"] = "nosuchword";
    EXPECT_THROW(Session::restore(bad, c), RestoreError);
    bad = good;
    bad.erase("history");
    EXPECT_THROW(Session::restore(bad, c), RestoreError);
    bad = good;
    bad["config"]["selector"]["kind"] = "oracle";
    EXPECT_THROW(Session::restore(bad, c), RestoreError);
    EXPECT_THROW(Session::restore(nlohmann::json::array(), c), RestoreError);
    EXPECT_THROW(Session::restore_file("/nonexistent/snap.json", c), RestoreError);
}

// p = 100 keeps every posting, so the whole run matches the standard pipeline.
TEST(Session, FullPercentileMatchesStandard) {
    auto c = small_keywords(9);
    auto std_cfg = short_config(9);
    auto ref_cfg = std_cfg;
    ref_cfg.refinement.enabled = true;
    ref_cfg.refinement.percentile = 100;
    Session a(c, std_cfg), b(c, ref_cfg);
    a.run();
    b.run();
    EXPECT_EQ(curve_csv(a), curve_csv(b));
    EXPECT_EQ(a.model().weights, b.model().weights);
    EXPECT_EQ(a.matrix(), b.matrix());
}

TEST(Session, AutoPercentile) {
    auto c = small_keywords(10);
    auto cfg = short_config(10);
    cfg.refinement.enabled = true;
    Session s(c, cfg);
    ASSERT_TRUE(s.percentile());
    EXPECT_TRUE(s.percentile_tuned());
    ASSERT_EQ(s.tuning_scores().size(), cfg.refinement.grid.size());
    double best = 0.0;
    for (const auto& p : s.tuning_scores()) best = std::max(best, p.validation_accuracy);
    double chosen = -1.0;
    for (const auto& p : s.tuning_scores())
        if (p.validation_accuracy == best) chosen = p.percentile;  // last, i.e. largest, maximizer
    EXPECT_EQ(*s.percentile(), chosen);
    cfg.mode = SessionMode::human;
    EXPECT_THROW(Session(c, cfg), ConfigError);
}

TEST(Session, ExploreDeterministicSubset) {
    auto c = small_keywords(11);
    Session s(c, short_config(11));
    for (PrimitiveId z = 0; z < 10; ++z) {
        auto a = s.explore(z, 5), b = s.explore(z, 5);
        EXPECT_EQ(a, b);
        EXPECT_LE(a.size(), 5u);
        EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
        for (auto i : a) EXPECT_TRUE(c->examples[i].contains(z));
        EXPECT_EQ(s.explore(z, 100000).size(), s.index()[z].size());
    }
}

TEST(Session, SimulateNeedsGold) {
    auto c = std::make_shared<const Corpus>(
        ingest_string("{\"text\":\"aa bb\"}\n{\"text\":\"bb cc\"}\n", DataFormat::text_jsonl, IngestConfig{0, {1, 0, 0}}));
    EXPECT_THROW(Session(c, short_config(0)), ConfigError);
    auto cfg = short_config(0);
    cfg.mode = SessionMode::human;
    Session s(c, cfg);
    EXPECT_FALSE(s.metric_available());
    s.next();
    auto rep = s.submit(std::nullopt);
    EXPECT_FALSE(rep.metric.has_value());
}

TEST(Session, CurveCsvRoundTrip) {
    std::vector<CurvePoint> pts{{5, 0.1}, {10, 2.0 / 3.0}};
    std::ostringstream o;
    write_curve_csv(o, pts);
    EXPECT_EQ(o.str().substr(0, 17), "iteration,metric\n");
    std::istringstream in(o.str());
    auto back = read_curve_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].value, 2.0 / 3.0);
    std::istringstream junk("x,y\n");
    EXPECT_THROW(read_curve_csv(junk), Error);
}
