#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace idp {

enum class DataFormat { text_jsonl, primitive_jsonl };
enum class DistanceKind { cosine, euclidean };

inline DataFormat parse_format(const std::string& s) {
    if (s == "text-jsonl") return DataFormat::text_jsonl;
    if (s == "primitive-jsonl") return DataFormat::primitive_jsonl;
    throw ConfigError("unknown dataset format '" + s + "'");
}
inline std::string to_string(DataFormat f) {
    return f == DataFormat::text_jsonl ? "text-jsonl" : "primitive-jsonl";
}
inline DistanceKind parse_distance(const std::string& s) {
    if (s == "cosine") return DistanceKind::cosine;
    if (s == "euclidean") return DistanceKind::euclidean;
    throw ConfigError("unknown distance kind '" + s + "'");
}
inline std::string to_string(DistanceKind d) {
    return d == DistanceKind::cosine ? "cosine" : "euclidean";
}

/// Sparse vector with strictly increasing indices.
struct SparseVector {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const noexcept { return index.size(); }
    double squared_norm() const noexcept {
        double s = 0.0;
        for (double v : value) s += v * v;
        return s;
    }
    bool operator==(const SparseVector&) const = default;
};

inline double dot(const SparseVector& a, const SparseVector& b) noexcept {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.index.size() && j < b.index.size()) {
        if (a.index[i] == b.index[j]) {
            s += a.value[i] * b.value[j];
            ++i;
            ++j;
        } else if (a.index[i] < b.index[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return s;
}

inline double dot(const SparseVector& a, const std::vector<double>& dense) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < a.index.size(); ++k) s += a.value[k] * dense[a.index[k]];
    return s;
}

struct Example {
    ExampleId id = 0;
    std::optional<std::string> text;
    std::vector<PrimitiveId> primitives;  // sorted, unique
    SparseVector features;
    std::optional<Label> gold;

    bool contains(PrimitiveId z) const noexcept {
        return std::binary_search(primitives.begin(), primitives.end(), z);
    }
};

struct Splits {
    std::vector<ExampleId> train, valid, test;  // each sorted
};

struct IngestConfig {
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    std::size_t min_token_len = 2;
};

/// Lowercase, split on non-alphanumeric runs, drop short tokens.
inline std::vector<std::string> tokenize(std::string_view text, std::size_t min_len = 2) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= min_len) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

inline Splits make_splits(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r >= 0.0)) throw ConfigError("split ratios must be nonnegative");
    double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    std::vector<ExampleId> perm(n);
    std::iota(perm.begin(), perm.end(), ExampleId{0});
    auto rng = make_rng(seed, Stream::split);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    auto n_valid = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_valid = std::min(n_valid, n - n_train);
    Splits s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                   perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.valid.begin(), s.valid.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

class Corpus {
  public:
    Corpus() = default;

    std::vector<Example> examples;
    std::vector<std::string> primitive_names;  // sorted; PrimitiveId indexes this
    Splits splits;
    std::size_t feature_dim = 0;
    DataFormat format = DataFormat::text_jsonl;

    std::size_t size() const noexcept { return examples.size(); }
    const Example& operator[](ExampleId i) const { return examples.at(i); }

    std::optional<PrimitiveId> find_primitive(std::string_view name) const {
        auto it = std::lower_bound(primitive_names.begin(), primitive_names.end(), name);
        if (it == primitive_names.end() || *it != name) return std::nullopt;
        return static_cast<PrimitiveId>(it - primitive_names.begin());
    }
    const std::string& primitive_name(PrimitiveId z) const { return primitive_names.at(z); }

    bool has_gold(const std::vector<ExampleId>& ids) const {
        return std::all_of(ids.begin(), ids.end(),
                           [&](ExampleId i) { return examples[i].gold.has_value(); });
    }

    /// Stable content hash over everything that affects results.
    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.add_u64(examples.size());
        for (const auto& name : primitive_names) h.add(name);
        for (const auto& e : examples) {
            h.add(e.text.value_or(""));
            h.add_u64(e.primitives.size());
            for (auto z : e.primitives) h.add_u64(z);
            h.add_u64(e.features.nnz());
            for (std::size_t k = 0; k < e.features.nnz(); ++k) {
                h.add_u64(e.features.index[k]);
                std::uint64_t bits;
                std::memcpy(&bits, &e.features.value[k], sizeof bits);
                h.add_u64(bits);
            }
            h.add_u64(e.gold ? static_cast<std::uint64_t>(to_int(*e.gold) + 2) : 0);
        }
        for (const auto* split : {&splits.train, &splits.valid, &splits.test}) {
            h.add_u64(split->size());
            for (auto i : *split) h.add_u64(i);
        }
        return h.value();
    }
};

/// TF-IDF over the unigram vocabulary of the train split. Feature index k is
/// the PrimitiveId of the token; tokens never seen in train get no weight.
/// `counts[i]` holds (primitive, raw count) pairs of example i.
inline void featurize(Corpus& corpus,
                      const std::vector<std::vector<std::pair<PrimitiveId, double>>>& counts) {
    const auto& train = corpus.splits.train;
    std::vector<std::size_t> df(corpus.primitive_names.size(), 0);
    for (auto i : train)
        for (const auto& [z, c] : counts[i]) ++df[z];
    const double n = static_cast<double>(train.size());
    std::vector<double> idf(df.size(), 0.0);
    for (std::size_t z = 0; z < df.size(); ++z)
        if (df[z] > 0) idf[z] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[z]))) + 1.0;

    std::vector<ExampleId> empty;
    for (auto& e : corpus.examples) {
        SparseVector v;
        for (const auto& [z, c] : counts[e.id]) {
            if (df[z] == 0) continue;
            v.index.push_back(z);
            v.value.push_back(c * idf[z]);
        }
        double norm = std::sqrt(v.squared_norm());
        if (v.nnz() == 0 || norm == 0.0) {
            empty.push_back(e.id);
            continue;
        }
        for (double& x : v.value) x /= norm;
        e.features = std::move(v);
    }
    if (!empty.empty()) {
        std::string ids;
        for (std::size_t k = 0; k < empty.size() && k < 20; ++k)
            ids += (k ? ", " : "") + std::to_string(empty[k]);
        if (empty.size() > 20) ids += ", ...";
        throw IngestError("examples with no in-vocabulary tokens: " + ids);
    }
    corpus.feature_dim = corpus.primitive_names.size();
}

namespace detail {

struct RawRecord {
    std::optional<std::string> text;
    std::vector<std::string> primitives;
    std::vector<double> features;
    std::optional<Label> gold;
};

inline RawRecord parse_record(const std::string& line, std::size_t line_no, DataFormat format) {
    auto fail = [&](const std::string& what) {
        return IngestError("line " + std::to_string(line_no) + ": " + what);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw fail(std::string("malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw fail("record is not an object");
    RawRecord r;
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw fail("label must be -1 or 1");
        auto v = it->get<long long>();
        if (v != 1 && v != -1) throw fail("label must be -1 or 1, got " + std::to_string(v));
        r.gold = label_from_int(v);
    }
    if (format == DataFormat::text_jsonl) {
        auto it = j.find("text");
        if (it == j.end() || !it->is_string()) throw fail("missing string field 'text'");
        r.text = it->get<std::string>();
    } else {
        auto p = j.find("primitives");
        auto f = j.find("features");
        if (p == j.end() || !p->is_array()) throw fail("missing array field 'primitives'");
        if (f == j.end() || !f->is_array()) throw fail("missing array field 'features'");
        for (const auto& v : *p) {
            if (!v.is_string()) throw fail("primitives must be strings");
            r.primitives.push_back(v.get<std::string>());
        }
        for (const auto& v : *f) {
            if (!v.is_number()) throw fail("features must be numbers");
            r.features.push_back(v.get<double>());
        }
        if (auto t = j.find("text"); t != j.end() && t->is_string()) r.text = t->get<std::string>();
    }
    return r;
}

}  // namespace detail

inline Corpus ingest(std::istream& in, DataFormat format, const IngestConfig& config) {
    std::vector<detail::RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        records.push_back(detail::parse_record(line, line_no, format));
    }
    if (records.empty()) throw IngestError("dataset is empty");

    const std::size_t n = records.size();
    std::vector<std::vector<std::string>> tokens(n);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) {
        tokens[i] = format == DataFormat::text_jsonl ? tokenize(*records[i].text, config.min_token_len)
                                                     : records[i].primitives;
        names.insert(names.end(), tokens[i].begin(), tokens[i].end());
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());

    Corpus corpus;
    corpus.format = format;
    corpus.primitive_names = std::move(names);
    std::unordered_map<std::string, PrimitiveId> lookup;
    lookup.reserve(corpus.primitive_names.size());
    for (std::size_t z = 0; z < corpus.primitive_names.size(); ++z)
        lookup.emplace(corpus.primitive_names[z], static_cast<PrimitiveId>(z));

    std::vector<std::vector<std::pair<PrimitiveId, double>>> counts(n);
    corpus.examples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = corpus.examples[i];
        e.id = static_cast<ExampleId>(i);
        e.text = records[i].text;
        e.gold = records[i].gold;
        std::map<PrimitiveId, double> c;
        for (const auto& t : tokens[i]) c[lookup.at(t)] += 1.0;
        counts[i].assign(c.begin(), c.end());
        for (const auto& [z, cnt] : c) e.primitives.push_back(z);
    }
    corpus.splits = make_splits(n, config.ratios, config.seed);

    if (format == DataFormat::text_jsonl) {
        featurize(corpus, counts);
    } else {
        std::size_t dim = records.front().features.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = records[i].features;
            if (f.size() != dim)
                throw IngestError("example " + std::to_string(i) + ": feature length " +
                                  std::to_string(f.size()) + " differs from " + std::to_string(dim));
            SparseVector v;
            for (std::size_t k = 0; k < f.size(); ++k) {
                if (!std::isfinite(f[k]))
                    throw IngestError("example " + std::to_string(i) + ": non-finite feature");
                if (f[k] != 0.0) {
                    v.index.push_back(static_cast<std::uint32_t>(k));
                    v.value.push_back(f[k]);
                }
            }
            if (v.nnz() == 0)
                throw IngestError("example " + std::to_string(i) + " has an all-zero feature vector");
            corpus.examples[i].features = std::move(v);
        }
        corpus.feature_dim = dim;
    }
    return corpus;
}

inline Corpus ingest(const std::string& path, DataFormat format, const IngestConfig& config) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open dataset '" + path + "'");
    return ingest(in, format, config);
}

inline Corpus ingest_string(const std::string& data, DataFormat format, const IngestConfig& config) {
    std::istringstream in(data);
    return ingest(in, format, config);
}

inline double distance(const SparseVector& a, const SparseVector& b, DistanceKind kind) {
    if (kind == DistanceKind::cosine) {
        double na = a.squared_norm(), nb = b.squared_norm();
        if (na == 0.0 || nb == 0.0) throw Error("cosine distance of a zero-norm vector");
        double d = 1.0 - dot(a, b) / std::sqrt(na * nb);
        return d < 0.0 ? 0.0 : d;
    }
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.nnz() || j < b.nnz()) {
        double diff;
        if (j == b.nnz() || (i < a.nnz() && a.index[i] < b.index[j])) {
            diff = a.value[i++];
        } else if (i == a.nnz() || b.index[j] < a.index[i]) {
            diff = -b.value[j++];
        } else {
            diff = a.value[i++] - b.value[j++];
        }
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline double distance(const Example& a, const Example& b, DistanceKind kind) {
    return distance(a.features, b.features, kind);
}

/// Train-split inverted index: primitive -> sorted example ids.
struct PrimitiveIndex {
    std::vector<std::vector<ExampleId>> postings;

    const std::vector<ExampleId>& operator[](PrimitiveId z) const { return postings.at(z); }
    std::size_t size() const noexcept { return postings.size(); }
};

inline PrimitiveIndex build_primitive_index(const Corpus& corpus) {
    PrimitiveIndex index;
    index.postings.resize(corpus.primitive_names.size());
    for (auto i : corpus.splits.train)
        for (auto z : corpus.examples[i].primitives) index.postings[z].push_back(i);
    return index;
}

}  // namespace idp
