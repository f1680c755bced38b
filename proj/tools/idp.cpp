#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <idp/idp.hpp>
#include <idp/service.hpp>

namespace fs = std::filesystem;
using namespace idp;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations, eval_every;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "config file (JSON); relative names also searched in $IDP_CONFIG_DIR");
    cmd->add_option("--set", c.sets, "override a config key, e.g. --set selector.kind=random")->take_all();
    cmd->add_option("--seed", c.seed, "base seed (session.seed)");
    cmd->add_option("--iterations", c.iterations, "iterations per run");
    cmd->add_option("--eval-every", c.eval_every, "evaluate every k iterations");
}

json load_merged(const Common& c) {
    json merged = merge_config(json::object());
    if (!c.config.empty()) {
        auto path = resolve_config_path(c.config);
        merged = merge_config(load_config_file(path));
        anchor_dataset_path(merged, path);
    }
    for (const auto& s : c.sets) apply_override(merged, s);
    if (c.seed) merged["session"]["seed"] = *c.seed;
    if (c.iterations) merged["session"]["iterations"] = *c.iterations;
    if (c.eval_every) merged["session"]["eval_every"] = *c.eval_every;
    return merged;
}

std::shared_ptr<const Corpus> load_dataset(const DatasetConfig& d, std::uint64_t session_seed) {
    if (d.path.empty()) throw ConfigError("dataset.path is not set");
    if (!fs::exists(d.path)) throw IngestError("dataset file '" + d.path + "' does not exist");
    return std::make_shared<const Corpus>(ingest(d.path, d.format, d.ingest_config(session_seed)));
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + p.string() + "'");
}

std::string curve_string(const std::vector<CurvePoint>& pts) {
    std::ostringstream o;
    write_curve_csv(o, pts);
    return o.str();
}

std::string num(double v) { return detail::fmt_double(v); }

// -- ingest -------------------------------------------------------------------

int cmd_ingest(const Common& c, const std::string& data, const std::string& format) {
    json merged = load_merged(c);
    if (!data.empty()) merged["dataset"]["path"] = data;
    if (!format.empty()) merged["dataset"]["format"] = format;
    auto app = app_config_from_json(merged);
    auto corpus = load_dataset(app.dataset, app.session.seed);
    std::size_t gold = 0;
    for (const auto& x : corpus->examples) gold += x.gold.has_value();
    json j = {{"dataset", app.dataset.name},
              {"examples", corpus->size()},
              {"gold_labeled", gold},
              {"primitives", corpus->primitive_names.size()},
              {"feature_dim", corpus->feature_dim},
              {"train", corpus->splits.train.size()},
              {"valid", corpus->splits.valid.size()},
              {"test", corpus->splits.test.size()},
              {"fingerprint", detail::hex64(corpus->fingerprint())}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

// -- simulate -----------------------------------------------------------------

int cmd_simulate(const Common& c, int runs, const std::string& out_dir) {
    if (runs < 1) throw ConfigError("--runs must be >= 1");
    json merged = load_merged(c);
    auto app = app_config_from_json(merged);
    if (app.session.mode != SessionMode::simulate) throw ConfigError("simulate needs session.mode = simulate");
    const std::uint64_t base = app.session.seed;

    // Everything that can fail on input is checked before the first write.
    std::map<std::uint64_t, std::shared_ptr<const Corpus>> corpora;
    auto corpus_for = [&](std::uint64_t seed) {
        auto key = app.dataset.seed.value_or(seed);
        auto it = corpora.find(key);
        if (it == corpora.end()) it = corpora.emplace(key, load_dataset(app.dataset, seed)).first;
        return it->second;
    };
    for (int r = 1; r <= runs; ++r) {
        auto corpus = corpus_for(base + static_cast<std::uint64_t>(r));
        if (!corpus->has_gold(corpus->splits.train))
            throw IngestError("simulate needs gold labels on the train split");
        if (corpus->splits.test.empty()) throw IngestError("simulate needs a nonempty test split");
    }

    struct RunResult {
        std::uint64_t seed;
        CurveSummary summary;
        std::string curve, trace, snapshot;
        std::size_t n_lfs;
        std::optional<double> percentile;
    };
    std::vector<RunResult> results;
    for (int r = 1; r <= runs; ++r) {
        SessionConfig cfg = app.session;
        cfg.seed = base + static_cast<std::uint64_t>(r);
        Session s(corpus_for(cfg.seed), cfg);
        std::ostringstream trace;
        auto summary = s.run([&](const IterationReport& rep) { trace << report_to_json(rep, s).dump() << '\n'; });
        results.push_back({cfg.seed, summary, curve_string(summary.points), trace.str(), s.snapshot().dump(1) + "\n",
                           s.lfs().size(), s.percentile()});
        std::cerr << "run " << r << " seed " << cfg.seed << ": mean " << num(summary.mean) << " over "
                  << summary.points.size() << " points, " << s.lfs().size() << " LFs\n";
    }

    const auto& grid = results.front().summary.points;
    for (const auto& r : results) {
        bool same = r.summary.points.size() == grid.size();
        for (std::size_t k = 0; same && k < grid.size(); ++k) same = r.summary.points[k].iteration == grid[k].iteration;
        if (!same) throw Error("runs produced different evaluation grids (pool exhausted early?)");
    }
    std::vector<CurvePoint> mean_curve = grid;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double s = 0.0;
        for (const auto& r : results) s += r.summary.points[k].value;
        mean_curve[k].value = s / static_cast<double>(results.size());
    }
    double mean_of_means = 0.0;
    for (const auto& r : results) mean_of_means += r.summary.mean;
    mean_of_means /= static_cast<double>(results.size());

    json summary = {{"dataset", app.dataset.name},
                    {"metric", to_string(app.session.metric)},
                    {"seed_base", base},
                    {"runs", json::array()},
                    {"mean", mean_of_means},
                    {"iterations", grid.empty() ? 0 : grid.back().iteration},
                    {"config", session_config_to_json(app.session)}};
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        json e = {{"run", k + 1},
                  {"seed", r.seed},
                  {"mean", r.summary.mean},
                  {"truncated", r.summary.truncated},
                  {"n_lfs", r.n_lfs}};
        e["percentile"] = r.percentile ? json(*r.percentile) : json(nullptr);
        summary["runs"].push_back(e);
    }

    fs::path out(out_dir);
    fs::create_directories(out);
    for (std::size_t k = 0; k < results.size(); ++k) {
        fs::path dir = out / ("run_" + std::to_string(k + 1));
        fs::create_directories(dir);
        write_file(dir / "curve.csv", results[k].curve);
        write_file(dir / "trace.jsonl", results[k].trace);
        write_file(dir / "snapshot.json", results[k].snapshot);
    }
    write_file(out / "mean_curve.csv", curve_string(mean_curve));
    write_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "mean " << num(mean_of_means) << " over " << runs << " run(s); artifacts in " << out.string() << "\n";
    return 0;
}

// -- report -------------------------------------------------------------------

struct ReportRow {
    std::string name;
    double mean;
    std::size_t runs;
    std::vector<CurvePoint> curve;
};

ReportRow load_report_row(const std::string& arg) {
    fs::path p(arg);
    auto read_curve = [](const fs::path& f) {
        std::ifstream in(f);
        if (!in) throw Error("cannot read '" + f.string() + "'");
        return read_curve_csv(in);
    };
    if (fs::is_directory(p)) {
        if (fs::exists(p / "summary.json")) {
            std::ifstream in(p / "summary.json");
            json s = json::parse(in);
            return {p.filename().string().empty() ? p.string() : p.filename().string(), s.at("mean").get<double>(),
                    s.at("runs").size(), read_curve(p / "mean_curve.csv")};
        }
        if (fs::exists(p / "curve.csv")) {
            auto c = read_curve(p / "curve.csv");
            return {p.filename().string(), curve_mean(c), 1, c};
        }
        throw Error("'" + arg + "' holds neither summary.json nor curve.csv");
    }
    auto c = read_curve(p);
    return {p.stem().string(), curve_mean(c), 1, c};
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& csv_out) {
    std::vector<ReportRow> rows;
    for (const auto& a : inputs) rows.push_back(load_report_row(a));
    for (const auto& r : rows) {
        bool same = r.curve.size() == rows[0].curve.size();
        for (std::size_t k = 0; same && k < r.curve.size(); ++k) same = r.curve[k].iteration == rows[0].curve[k].iteration;
        if (!same) throw Error("evaluation grids differ between '" + rows[0].name + "' and '" + r.name + "'");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.mean > b.mean; });
    std::size_t w = 6;
    for (const auto& r : rows) w = std::max(w, r.name.size());
    std::cout << std::left << std::setw(static_cast<int>(w)) << "config" << "  " << std::setw(10) << "mean"
              << "  runs\n";
    for (const auto& r : rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", r.mean);
        std::cout << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << std::setw(10) << buf << "  "
                  << r.runs << "\n";
    }
    if (!csv_out.empty()) {
        std::ostringstream o;
        o << "config,mean,runs\n";
        for (const auto& r : rows) o << r.name << ',' << num(r.mean) << ',' << r.runs << '\n';
        write_file(csv_out, o.str());
    }
    return 0;
}

// -- locality -----------------------------------------------------------------

int cmd_locality(const Common& c, const std::string& out) {
    json merged = load_merged(c);
    auto app = app_config_from_json(merged);
    auto corpus = load_dataset(app.dataset, app.session.seed);
    Session s(corpus, app.session);
    s.run();
    if (s.lfs().empty()) throw Error("the run created no LFs; nothing to report");
    auto rep = locality_report(s.lfs(), *corpus, app.session.refinement.distance);
    std::ostringstream o;
    write_locality_csv(o, rep);
    if (out.empty()) std::cout << o.str();
    else write_file(out, o.str());
    return 0;
}

// -- serve --------------------------------------------------------------------

int cmd_serve(const Common& c, const std::vector<std::string>& extra) {
    json merged = load_merged(c);
    auto app = app_config_from_json(merged);
    SessionService svc(merged);
    if (!app.dataset.path.empty()) svc.add_dataset(app.dataset.name, load_dataset(app.dataset, app.session.seed));
    for (const auto& e : extra) {
        auto eq = e.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--dataset expects name=path");
        DatasetConfig d = app.dataset;
        d.name = e.substr(0, eq);
        d.path = e.substr(eq + 1);
        svc.add_dataset(d.name, load_dataset(d, app.session.seed));
    }
    if (svc.dataset_names().empty()) throw ConfigError("no dataset configured; set dataset.path or --dataset");
    auto listen = resolve_listen(app.service);
    httplib::Server server;
    svc.mount(server);
    std::cerr << "serving";
    for (const auto& n : svc.dataset_names()) std::cerr << " '" << n << "'";
    std::cerr << " on http://" << listen.host << ":" << listen.port << "\n";
    if (!server.listen(listen.host, listen.port)) throw Error("cannot listen on " + listen.host + ":" + std::to_string(listen.port));
    return 0;
}

// -- generate -----------------------------------------------------------------

int cmd_generate(const std::string& kind, std::uint64_t seed, std::optional<std::size_t> n, const std::string& out) {
    std::string data;
    if (kind == "keyword") {
        synthetic::KeywordSpec spec;
        if (n) spec.n = *n;
        data = synthetic::keyword_corpus(seed, spec);
    } else if (kind == "cluster") {
        data = synthetic::cluster_corpus(seed);
    } else if (kind == "ring") {
        synthetic::RingSpec spec;
        if (n) spec.n = *n;
        data = synthetic::ring_corpus(seed, spec);
    } else {
        throw ConfigError("unknown corpus kind '" + kind + "'");
    }
    if (out.empty()) std::cout << data;
    else write_file(out, data);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive data programming engine"};
    app.require_subcommand(1);

    Common common;
    std::string data, format;
    auto* ingest_cmd = app.add_subcommand("ingest", "ingest a dataset and print its summary");
    add_common(ingest_cmd, common);
    ingest_cmd->add_option("--data", data, "dataset path (overrides dataset.path)");
    ingest_cmd->add_option("--format", format, "text-jsonl or primitive-jsonl");

    int runs = 1;
    std::string out_dir = "out";
    auto* sim_cmd = app.add_subcommand("simulate", "run simulated-user experiments");
    add_common(sim_cmd, common);
    sim_cmd->add_option("--runs", runs, "number of runs; run r uses seed + r");
    sim_cmd->add_option("--out", out_dir, "output directory");

    std::vector<std::string> report_inputs;
    std::string report_csv;
    auto* report_cmd = app.add_subcommand("report", "compare curve means across runs");
    report_cmd->add_option("inputs", report_inputs, "simulate output dirs or curve CSVs")->required();
    report_cmd->add_option("--out", report_csv, "also write the table as CSV");

    std::string locality_out;
    auto* loc_cmd = app.add_subcommand("locality", "coverage/accuracy by distance quartile after a run");
    add_common(loc_cmd, common);
    loc_cmd->add_option("--out", locality_out, "CSV path (default stdout)");

    std::vector<std::string> serve_datasets;
    auto* serve_cmd = app.add_subcommand("serve", "start the HTTP session service");
    add_common(serve_cmd, common);
    serve_cmd->add_option("--dataset", serve_datasets, "extra dataset as name=path (repeatable)");

    std::string gen_kind, gen_out;
    std::uint64_t gen_seed = 0;
    std::optional<std::size_t> gen_n;
    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic corpus");
    gen_cmd->add_option("kind", gen_kind, "keyword, cluster or ring")->required();
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--n", gen_n, "number of examples (keyword, ring)");
    gen_cmd->add_option("--out", gen_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*ingest_cmd) return cmd_ingest(common, data, format);
        if (*sim_cmd) return cmd_simulate(common, runs, out_dir);
        if (*report_cmd) return cmd_report(report_inputs, report_csv);
        if (*loc_cmd) return cmd_locality(common, locality_out);
        if (*serve_cmd) return cmd_serve(common, serve_datasets);
        if (*gen_cmd) return cmd_generate(gen_kind, gen_seed, gen_n, gen_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
