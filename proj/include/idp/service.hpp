#pragma once

#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include <httplib.h>

#include "session.hpp"

namespace idp {

struct ServiceResponse {
    int status = 200;
    json body;
};

/// host:port from IDP_LISTEN when set, else the configured values.
inline ServiceConfig resolve_listen(ServiceConfig cfg) {
    const char* env = std::getenv("IDP_LISTEN");
    if (!env || !*env) return cfg;
    std::string s = env;
    auto colon = s.rfind(':');
    if (colon == std::string::npos) throw ConfigError("IDP_LISTEN must be host:port");
    if (colon > 0) cfg.host = s.substr(0, colon);
    try {
        std::size_t used = 0;
        int port = std::stoi(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1 || port < 0 || port > 65535) throw std::invalid_argument("port");
        cfg.port = port;
    } catch (const std::exception&) {
        throw ConfigError("IDP_LISTEN has an invalid port: '" + s + "'");
    }
    return cfg;
}

/// Human-in-the-loop sessions over a fixed set of ingested datasets.
/// Requests on one session are serialized; distinct sessions run in parallel.
class SessionService {
  public:
    /// `base_config` is a merged config; request configs are overlaid on it.
    explicit SessionService(json base_config = merge_config(json::object())) : base_(std::move(base_config)) {
        base_["session"]["mode"] = "human";
    }

    void add_dataset(const std::string& name, std::shared_ptr<const Corpus> corpus) {
        std::lock_guard lock(registry_mu_);
        datasets_[name] = std::move(corpus);
    }

    std::vector<std::string> dataset_names() const {
        std::lock_guard lock(registry_mu_);
        std::vector<std::string> out;
        for (const auto& [k, v] : datasets_) out.push_back(k);
        return out;
    }

    // body: {"dataset": name, "config": {section: {...}}}
    ServiceResponse create(const json& body) {
        if (!body.is_object()) return error(400, "request body must be a JSON object");
        if (!body.contains("dataset") || !body["dataset"].is_string())
            return error(400, "field 'dataset' must name an ingested dataset");
        std::shared_ptr<const Corpus> corpus;
        {
            std::lock_guard lock(registry_mu_);
            auto it = datasets_.find(body["dataset"].get<std::string>());
            if (it == datasets_.end())
                return error(400, "unknown dataset '" + body["dataset"].get<std::string>() + "'");
            corpus = it->second;
        }
        json cfg = base_;
        try {
            if (body.contains("config")) {
                json patch = body["config"];
                if (patch.is_object()) {
                    patch.erase("dataset");
                    patch.erase("service");
                }
                detail::merge_into(cfg, patch, default_config_json(), "");
            }
            auto sc = session_config_from_json(cfg);
            if (sc.refinement.enabled && !sc.refinement.percentile)
                return error(400, "refinement.percentile \"auto\" is not available to live sessions; set a number");
            auto entry = std::make_shared<Entry>(Session(corpus, sc));
            auto id = new_id();
            {
                std::lock_guard lock(registry_mu_);
                sessions_.emplace(id, entry);
            }
            std::lock_guard lock(entry->mu);
            auto st = state_json(id, entry->session);
            return {201, st};
        } catch (const Error& e) {
            return error(400, e.what());
        }
    }

    ServiceResponse next(const std::string& id) {
        auto entry = find(id);
        if (!entry) return unknown(id);
        std::lock_guard lock(entry->mu);
        auto& s = entry->session;
        if (s.config().mode == SessionMode::simulate)
            return error(409, "session runs in simulate mode; it takes no human input");
        if (s.pending()) return error(409, "pending response: submit an LF or skip first");
        auto x = s.next();
        json j = {{"session_id", id}, {"iteration", s.iteration() + 1}};
        if (!x) {
            j["state"] = "complete";
            j["example"] = nullptr;
            j["candidates"] = json::array();
            return {200, j};
        }
        j["state"] = state_name(s);
        j["example"] = example_json(s.corpus(), *x);
        j["candidates"] = j["example"]["primitives"];
        return {200, j};
    }

    // body: {"primitive": name, "label": 1 | -1} or {"skip": true}
    ServiceResponse submit(const std::string& id, const json& body) {
        auto entry = find(id);
        if (!entry) return unknown(id);
        std::lock_guard lock(entry->mu);
        auto& s = entry->session;
        if (!s.pending()) return error(409, "no pending example; call next first");
        if (!body.is_object()) return error(400, "request body must be a JSON object");
        std::optional<std::pair<PrimitiveId, Label>> answer;
        const bool skip = body.contains("skip") && body["skip"].is_boolean() && body["skip"].get<bool>();
        if (!skip) {
            if (!body.contains("primitive") || !body["primitive"].is_string())
                return error(422, "field 'primitive' must be a primitive name (or send {\"skip\": true})");
            if (!body.contains("label") || !body["label"].is_number_integer())
                return error(422, "field 'label' must be 1 or -1");
            auto lab = body["label"].get<long long>();
            if (lab != 1 && lab != -1) return error(422, "field 'label' must be 1 or -1");
            auto name = body["primitive"].get<std::string>();
            auto z = s.corpus().find_primitive(name);
            if (!z || !s.corpus().examples[*s.pending()].contains(*z))
                return error(422, "primitive '" + name + "' is not in the pending example");
            answer = std::make_pair(*z, label_from_int(lab));
        }
        try {
            auto rep = s.submit(answer);
            json j = report_to_json(rep, s);
            j["session_id"] = id;
            j["state"] = state_name(s);
            j["curve_tail"] = curve_json(s.curve(), 5);
            return {200, j};
        } catch (const InvalidSubmission& e) {
            return error(422, e.what());
        } catch (const Error& e) {
            return error(500, e.what());
        }
    }

    ServiceResponse explore(const std::string& id, const std::string& primitive, const std::string& limit_arg) {
        auto entry = find(id);
        if (!entry) return unknown(id);
        std::size_t limit = 10;
        if (!limit_arg.empty()) {
            try {
                std::size_t used = 0;
                long long v = std::stoll(limit_arg, &used);
                if (used != limit_arg.size() || v < 1) throw std::invalid_argument("limit");
                limit = static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                return error(400, "query parameter 'limit' must be a positive integer");
            }
        }
        std::lock_guard lock(entry->mu);
        const auto& s = entry->session;
        auto z = s.corpus().find_primitive(primitive);
        if (!z) return error(404, "unknown primitive '" + primitive + "'");
        json j = {{"session_id", id}, {"primitive", primitive}, {"examples", json::array()}};
        for (auto i : s.explore(*z, limit)) j["examples"].push_back(example_json(s.corpus(), i));
        return {200, j};
    }

    ServiceResponse state(const std::string& id) {
        auto entry = find(id);
        if (!entry) return unknown(id);
        std::lock_guard lock(entry->mu);
        return {200, state_json(id, entry->session)};
    }

    /// Snapshot of a live session (for tests and offline replay).
    std::optional<json> snapshot(const std::string& id) {
        auto entry = find(id);
        if (!entry) return std::nullopt;
        std::lock_guard lock(entry->mu);
        return entry->session.snapshot();
    }

    void mount(httplib::Server& svr) {
        auto send = [](httplib::Response& res, const ServiceResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        auto parse = [](const httplib::Request& req) -> std::optional<json> {
            if (req.body.empty()) return json::object();
            try {
                return json::parse(req.body);
            } catch (const json::parse_error&) {
                return std::nullopt;
            }
        };
        svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        svr.Post("/sessions", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
            auto body = parse(req);
            send(res, body ? create(*body) : error(400, "request body is not valid JSON"));
        });
        svr.Get(R"(/sessions/([^/]+)/next)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, next(req.matches[1]));
        });
        svr.Post(R"(/sessions/([^/]+)/lf)", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
            auto body = parse(req);
            send(res, body ? submit(req.matches[1], *body) : error(400, "request body is not valid JSON"));
        });
        svr.Get(R"(/sessions/([^/]+)/explore)", [this, send](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("primitive")) return send(res, error(400, "query parameter 'primitive' is required"));
            send(res, explore(req.matches[1], req.get_param_value("primitive"),
                              req.has_param("limit") ? req.get_param_value("limit") : std::string()));
        });
        svr.Get(R"(/sessions/([^/]+)/state)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, state(req.matches[1]));
        });
        svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            res.set_content(json{{"error", "not found"}}.dump(), "application/json");
        });
    }

    static json example_json(const Corpus& c, ExampleId i) {
        const auto& x = c.examples.at(i);
        json j = {{"id", i}, {"primitives", json::array()}};
        j["text"] = x.text ? json(*x.text) : json(nullptr);
        for (auto z : x.primitives) j["primitives"].push_back(c.primitive_name(z));
        return j;
    }

  private:
    struct Entry {
        explicit Entry(Session s) : session(std::move(s)) {}
        std::mutex mu;
        Session session;
    };

    static ServiceResponse error(int status, const std::string& msg) { return {status, json{{"error", msg}}}; }
    static ServiceResponse unknown(const std::string& id) { return error(404, "unknown session '" + id + "'"); }

    static std::string state_name(const Session& s) {
        if (s.pending()) return "awaiting-lf";
        return s.complete() ? "complete" : "ready";
    }

    static json curve_json(const std::vector<CurvePoint>& pts, std::size_t tail = 0) {
        json a = json::array();
        std::size_t from = tail && pts.size() > tail ? pts.size() - tail : 0;
        for (std::size_t k = from; k < pts.size(); ++k)
            a.push_back({{"iteration", pts[k].iteration}, {"value", pts[k].value}});
        return a;
    }

    static json state_json(const std::string& id, const Session& s) {
        json j = {{"session_id", id},
                  {"state", state_name(s)},
                  {"iteration", s.iteration()},
                  {"pool_size", s.pool().size()},
                  {"metric", to_string(s.config().metric)},
                  {"lfs", json::array()},
                  {"curve", curve_json(s.curve())}};
        for (std::size_t k = 0; k < s.lfs().size(); ++k) {
            auto lf = s.lf_to_json(s.lfs()[k]);
            lf["coverage"] = s.refined_lfs()[k].retained.size();
            j["lfs"].push_back(lf);
        }
        j["pending"] = s.pending() ? example_json(s.corpus(), *s.pending()) : json(nullptr);
        j["config"] = session_config_to_json(s.config());
        return j;
    }

    std::shared_ptr<Entry> find(const std::string& id) {
        std::lock_guard lock(registry_mu_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    std::string new_id() {
        std::uint64_t n = counter_.fetch_add(1) + 1;
        return detail::hex64(salt_ ^ splitmix64(n)).substr(0, 12) + std::to_string(n);
    }

    json base_;
    mutable std::mutex registry_mu_;
    std::map<std::string, std::shared_ptr<const Corpus>> datasets_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::atomic<std::uint64_t> counter_{0};
    std::uint64_t salt_ = std::random_device{}();
};

}  // namespace idp
