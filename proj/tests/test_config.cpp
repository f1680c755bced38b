#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <idp/idp.hpp>

using namespace idp;

TEST(Config, DefaultsRoundTrip) {
    auto merged = merge_config(json::object());
    auto app = app_config_from_json(merged);
    EXPECT_EQ(app.session.selector.kind, SelectorKind::seu);
    EXPECT_EQ(app.session.label_model.kind, LabelModelKind::majority);
    EXPECT_FALSE(app.session.refinement.percentile.has_value());
    EXPECT_EQ(app.session.iterations, 50);
    EXPECT_EQ(app.session.eval_every, 5);
    EXPECT_EQ(app.service.port, 8080);
    auto back = session_config_from_json(merge_config(session_config_to_json(app.session)));
    EXPECT_EQ(session_config_to_json(back), session_config_to_json(app.session));
}

TEST(Config, RejectsUnknownKeysAndTypes) {
    EXPECT_THROW(merge_config(json{{"selector", {{"knd", "seu"}}}}), ConfigError);
    EXPECT_THROW(merge_config(json{{"nosection", json::object()}}), ConfigError);
    EXPECT_THROW(merge_config(json{{"session", {{"iterations", "ten"}}}}), ConfigError);
    EXPECT_THROW(session_config_from_json(merge_config(json{{"selector", {{"kind", "oracle"}}}})), ConfigError);
    EXPECT_THROW(session_config_from_json(merge_config(json{{"refinement", {{"percentile", 0}}}})), ConfigError);
    EXPECT_THROW(merge_config(json{{"refinement", {{"percentile", "half"}}}}), ConfigError);
    EXPECT_THROW(session_config_from_json(merge_config(json{{"session", {{"eval_every", 0}}}})), ConfigError);
}

TEST(Config, Overrides) {
    auto cfg = merge_config(json::object());
    apply_override(cfg, "selector.kind=random");
    apply_override(cfg, "refinement.percentile=25");
    apply_override(cfg, "session.seed=7");
    apply_override(cfg, "refinement.enabled=true");
    auto s = session_config_from_json(cfg);
    EXPECT_EQ(s.selector.kind, SelectorKind::random);
    EXPECT_EQ(*s.refinement.percentile, 25.0);
    EXPECT_EQ(s.seed, 7u);
    EXPECT_TRUE(s.refinement.enabled);
    apply_override(cfg, "refinement.percentile=auto");
    EXPECT_FALSE(session_config_from_json(cfg).refinement.percentile.has_value());
    EXPECT_THROW(apply_override(cfg, "selector=random"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "selector.nope=1"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "noequals"), ConfigError);
}

TEST(Config, DatasetPathAndSeed) {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "idp_config_test";
    fs::create_directories(dir / "sub");
    auto path = dir / "sub" / "run.json";
    std::ofstream(path) << R"({"dataset": {"path": "../data/x.jsonl"}, "session": {"seed": 3}})";
    auto merged = merge_config(load_config_file(path));
    anchor_dataset_path(merged, path);
    auto app = app_config_from_json(merged);
    EXPECT_EQ(fs::path(app.dataset.path), (dir / "data" / "x.jsonl").lexically_normal());
    EXPECT_EQ(app.dataset.name, "x");
    EXPECT_EQ(app.dataset.ingest_config(app.session.seed).seed, 3u);

    ::setenv("IDP_CONFIG_DIR", (dir / "sub").c_str(), 1);
    EXPECT_EQ(resolve_config_path("run.json"), dir / "sub" / "run.json");
    ::unsetenv("IDP_CONFIG_DIR");
    EXPECT_THROW(resolve_config_path("missing-config.json"), ConfigError);
    fs::remove_all(dir);
}
