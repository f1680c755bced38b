#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "contextualizer.hpp"
#include "end_model.hpp"
#include "selection.hpp"
#include "simulator.hpp"

namespace idp {

using json = nlohmann::json;

enum class SessionMode { simulate, human };

inline SessionMode parse_mode(const std::string& s) {
    if (s == "simulate") return SessionMode::simulate;
    if (s == "human") return SessionMode::human;
    throw ConfigError("unknown session.mode '" + s + "'");
}
inline std::string to_string(SessionMode m) { return m == SessionMode::simulate ? "simulate" : "human"; }

struct SessionConfig {
    SelectorConfig selector;
    LabelModelConfig label_model;
    RefinementConfig refinement;
    TrainConfig end_model;
    SimulatorConfig simulator;
    SessionMode mode = SessionMode::simulate;
    int iterations = 50;
    int eval_every = 5;
    Metric metric = Metric::accuracy;
    std::uint64_t seed = 0;

    void validate() const {
        selector.validate();
        label_model.validate();
        refinement.validate();
        end_model.validate();
        simulator.validate();
        if (iterations < 1) throw ConfigError("session.iterations must be >= 1");
        if (eval_every < 1) throw ConfigError("session.eval_every must be >= 1");
    }
};

struct DatasetConfig {
    std::string name;
    std::string path;
    DataFormat format = DataFormat::text_jsonl;
    std::optional<std::uint64_t> seed;  // split seed; defaults to the session seed
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    std::size_t min_token_len = 2;

    IngestConfig ingest_config(std::uint64_t session_seed) const {
        return IngestConfig{seed.value_or(session_seed), ratios, min_token_len};
    }
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct AppConfig {
    DatasetConfig dataset;
    SessionConfig session;
    ServiceConfig service;
};

inline json default_config_json() {
    return json::parse(R"({
  "dataset": {"name": "", "path": "", "format": "text-jsonl", "seed": null,
              "ratios": [0.8, 0.1, 0.1], "min_token_len": 2},
  "selector": {"kind": "seu", "user_model": "accuracy-weighted", "utility": "full",
               "normalization": "per-label", "multi_lf": false, "exclude_existing": true,
               "prior_positive": 0.5},
  "label_model": {"kind": "majority", "prior_positive": 0.5, "em_iters": 100, "em_tol": 1e-10,
                  "smoothing": 1.0},
  "refinement": {"enabled": false, "percentile": "auto", "distance": "cosine",
                 "grid": [25, 50, 75, 100]},
  "end_model": {"epochs": 500, "lr": 0.5, "l2": 0.0001},
  "simulator": {"threshold": 0.5, "empty_behavior": "skip"},
  "session": {"mode": "simulate", "iterations": 50, "eval_every": 5, "metric": "accuracy", "seed": 0},
  "service": {"host": "127.0.0.1", "port": 8080}
})");
}

namespace detail {

inline bool compatible(const json& def, const json& v) {
    if (def.is_null()) return true;  // free-typed slot
    if (def.is_number()) return v.is_number();
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_array()) return v.is_array();
    if (def.is_object()) return v.is_object();
    return v.is_string();
}

// Keys whose accepted values differ from the default's type; nullopt for the rest.
inline std::optional<bool> special_ok(const std::string& key, const json& v) {
    if (key == "refinement.percentile") return v.is_number() || (v.is_string() && v == "auto");
    if (key == "dataset.seed") return v.is_null() || v.is_number_unsigned() || v.is_number_integer();
    return std::nullopt;
}

inline void merge_into(json& base, const json& patch, const json& schema, const std::string& prefix) {
    if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        const json& def = schema.at(it.key());
        if (def.is_object()) {
            merge_into(base[it.key()], it.value(), def, key);
        } else if (special_ok(key, it.value()).value_or(compatible(def, it.value()))) {
            base[it.key()] = it.value();
        } else {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }
}

}  // namespace detail

/// Overlays a user config onto the defaults; unknown keys are rejected.
inline json merge_config(const json& user) {
    json out = default_config_json();
    detail::merge_into(out, user, default_config_json(), "");
    return out;
}

/// `key=value` with a dotted key. The value is parsed as JSON when possible,
/// else taken as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string key = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json patch = value;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        parts.push_back(key.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    const json schema = default_config_json();
    const json* node = &schema;
    for (const auto& p : parts) {
        if (!node->is_object() || !node->contains(p)) throw ConfigError("unknown config key '" + key + "'");
        node = &node->at(p);
    }
    if (node->is_object()) throw ConfigError("override '" + key + "' names a section, not a key");
    detail::merge_into(cfg, patch, schema, "");
}

inline json session_config_to_json(const SessionConfig& c) {
    json j;
    j["selector"] = {{"kind", to_string(c.selector.kind)},
                     {"user_model", to_string(c.selector.user_model)},
                     {"utility", to_string(c.selector.utility)},
                     {"normalization", to_string(c.selector.normalization)},
                     {"multi_lf", c.selector.multi_lf},
                     {"exclude_existing", c.selector.exclude_existing},
                     {"prior_positive", c.selector.prior_positive}};
    j["label_model"] = {{"kind", to_string(c.label_model.kind)},
                        {"prior_positive", c.label_model.prior_positive},
                        {"em_iters", c.label_model.em_iters},
                        {"em_tol", c.label_model.em_tol},
                        {"smoothing", c.label_model.smoothing}};
    j["refinement"] = {{"enabled", c.refinement.enabled},
                       {"percentile", c.refinement.percentile ? json(*c.refinement.percentile) : json("auto")},
                       {"distance", to_string(c.refinement.distance)},
                       {"grid", c.refinement.grid}};
    j["end_model"] = {{"epochs", c.end_model.epochs}, {"lr", c.end_model.learning_rate}, {"l2", c.end_model.l2}};
    j["simulator"] = {{"threshold", c.simulator.threshold},
                      {"empty_behavior", to_string(c.simulator.empty_behavior)}};
    j["session"] = {{"mode", to_string(c.mode)},
                    {"iterations", c.iterations},
                    {"eval_every", c.eval_every},
                    {"metric", to_string(c.metric)},
                    {"seed", c.seed}};
    return j;
}

/// Reads the session sections of a merged config.
inline SessionConfig session_config_from_json(const json& j) {
    SessionConfig c;
    try {
        const auto& s = j.at("selector");
        c.selector.kind = parse_selector_kind(s.at("kind").get<std::string>());
        c.selector.user_model = parse_user_model(s.at("user_model").get<std::string>());
        c.selector.utility = parse_utility(s.at("utility").get<std::string>());
        c.selector.normalization = parse_normalization(s.at("normalization").get<std::string>());
        c.selector.multi_lf = s.at("multi_lf").get<bool>();
        c.selector.exclude_existing = s.at("exclude_existing").get<bool>();
        c.selector.prior_positive = s.at("prior_positive").get<double>();

        const auto& l = j.at("label_model");
        c.label_model.kind = parse_label_model_kind(l.at("kind").get<std::string>());
        c.label_model.prior_positive = l.at("prior_positive").get<double>();
        c.label_model.em_iters = l.at("em_iters").get<int>();
        c.label_model.em_tol = l.at("em_tol").get<double>();
        c.label_model.smoothing = l.at("smoothing").get<double>();

        const auto& r = j.at("refinement");
        c.refinement.enabled = r.at("enabled").get<bool>();
        const auto& p = r.at("percentile");
        if (p.is_string()) {
            if (p != "auto") throw ConfigError("refinement.percentile must be a number or \"auto\"");
            c.refinement.percentile.reset();
        } else {
            c.refinement.percentile = p.get<double>();
        }
        c.refinement.distance = parse_distance(r.at("distance").get<std::string>());
        c.refinement.grid = r.at("grid").get<std::vector<double>>();

        const auto& e = j.at("end_model");
        c.end_model.epochs = e.at("epochs").get<int>();
        c.end_model.learning_rate = e.at("lr").get<double>();
        c.end_model.l2 = e.at("l2").get<double>();

        const auto& sim = j.at("simulator");
        c.simulator.threshold = sim.at("threshold").get<double>();
        c.simulator.empty_behavior = parse_empty_behavior(sim.at("empty_behavior").get<std::string>());

        const auto& ss = j.at("session");
        c.mode = parse_mode(ss.at("mode").get<std::string>());
        c.iterations = ss.at("iterations").get<int>();
        c.eval_every = ss.at("eval_every").get<int>();
        c.metric = parse_metric(ss.at("metric").get<std::string>());
        c.seed = ss.at("seed").get<std::uint64_t>();
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("invalid config: ") + ex.what());
    }
    c.validate();
    return c;
}

inline AppConfig app_config_from_json(const json& merged) {
    AppConfig a;
    a.session = session_config_from_json(merged);
    try {
        const auto& d = merged.at("dataset");
        a.dataset.name = d.at("name").get<std::string>();
        a.dataset.path = d.at("path").get<std::string>();
        a.dataset.format = parse_format(d.at("format").get<std::string>());
        if (!d.at("seed").is_null()) a.dataset.seed = d.at("seed").get<std::uint64_t>();
        auto ratios = d.at("ratios").get<std::vector<double>>();
        if (ratios.size() != 3) throw ConfigError("dataset.ratios must have three entries");
        a.dataset.ratios = {ratios[0], ratios[1], ratios[2]};
        auto mtl = d.at("min_token_len").get<long long>();
        if (mtl < 1) throw ConfigError("dataset.min_token_len must be >= 1");
        a.dataset.min_token_len = static_cast<std::size_t>(mtl);
        if (a.dataset.name.empty() && !a.dataset.path.empty())
            a.dataset.name = std::filesystem::path(a.dataset.path).stem().string();

        const auto& s = merged.at("service");
        a.service.host = s.at("host").get<std::string>();
        a.service.port = s.at("port").get<int>();
        if (a.service.port < 0 || a.service.port > 65535) throw ConfigError("service.port out of range");
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("invalid config: ") + ex.what());
    }
    return a;
}

/// Resolves a config path: as given, else under $IDP_CONFIG_DIR.
inline std::filesystem::path resolve_config_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (const char* dir = std::getenv("IDP_CONFIG_DIR"); dir && *dir) {
        fs::path p = fs::path(dir) / path;
        if (fs::exists(p)) return p;
    }
    throw ConfigError("config file '" + path + "' not found");
}

inline json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
}

/// Dataset paths in a config file are relative to that file.
inline void anchor_dataset_path(json& merged, const std::filesystem::path& config_path) {
    auto& p = merged["dataset"]["path"];
    if (!p.is_string() || p.get<std::string>().empty()) return;
    std::filesystem::path dp = p.get<std::string>();
    if (dp.is_relative()) p = (config_path.parent_path() / dp).lexically_normal().string();
}

}  // namespace idp
