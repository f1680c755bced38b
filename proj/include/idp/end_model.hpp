#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "label_model.hpp"

namespace idp {

struct TrainConfig {
    int epochs = 500;
    double learning_rate = 0.5;
    double l2 = 1e-4;

    void validate() const {
        if (epochs < 0) throw ConfigError("end_model.epochs must be >= 0");
        if (!(learning_rate > 0.0)) throw ConfigError("end_model.lr must be > 0");
        if (!(l2 >= 0.0)) throw ConfigError("end_model.l2 must be >= 0");
    }
};

inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

/// ln(1 + e^z) without overflow.
inline double softplus(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    TrainConfig config;

    double margin(const SparseVector& x) const noexcept { return dot(x, weights) + bias; }
    double score(const SparseVector& x) const noexcept { return sigmoid(margin(x)); }
    bool operator==(const LinearModel& o) const {
        return weights == o.weights && bias == o.bias;
    }
};

inline LinearModel zero_model(std::size_t dim, const TrainConfig& cfg = {}) {
    return LinearModel{std::vector<double>(dim, 0.0), 0.0, cfg};
}

struct SoftDataset {
    std::vector<const SparseVector*> x;
    std::vector<double> q;  // target P(y=+1)
};

/// Mean soft cross-entropy plus (l2/2)|w|^2; the bias is not penalized.
inline double loss_and_gradient(const SoftDataset& data, const std::vector<double>& w, double b, double l2,
                                std::vector<double>* grad_w, double* grad_b) {
    const double n = static_cast<double>(data.q.size());
    double loss = 0.0, gb = 0.0;
    if (grad_w) grad_w->assign(w.size(), 0.0);
    for (std::size_t i = 0; i < data.q.size(); ++i) {
        const auto& x = *data.x[i];
        double z = dot(x, w) + b;
        double q = data.q[i];
        // -q ln s(z) - (1-q) ln(1-s(z)) = q softplus(-z) + (1-q) softplus(z)
        loss += q * softplus(-z) + (1.0 - q) * softplus(z);
        double g = sigmoid(z) - q;
        gb += g;
        if (grad_w)
            for (std::size_t k = 0; k < x.nnz(); ++k) (*grad_w)[x.index[k]] += g * x.value[k];
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    loss = loss / n + 0.5 * l2 * reg;
    if (grad_w)
        for (std::size_t k = 0; k < w.size(); ++k) (*grad_w)[k] = (*grad_w)[k] / n + l2 * w[k];
    if (grad_b) *grad_b = gb / n;
    return loss;
}

/// Full-batch gradient descent from zero. `loss_trace`, if given, receives
/// the objective before each update and once after the last.
inline LinearModel train(const SoftDataset& data, std::size_t dim, const TrainConfig& cfg,
                         std::vector<double>* loss_trace = nullptr) {
    cfg.validate();
    if (data.q.empty()) throw Error("untrainable: no covered training example");
    LinearModel m = zero_model(dim, cfg);
    std::vector<double> gw;
    double gb = 0.0;
    for (int e = 0; e < cfg.epochs; ++e) {
        double loss = loss_and_gradient(data, m.weights, m.bias, cfg.l2, &gw, &gb);
        if (loss_trace) loss_trace->push_back(loss);
        for (std::size_t k = 0; k < dim; ++k) m.weights[k] -= cfg.learning_rate * gw[k];
        m.bias -= cfg.learning_rate * gb;
    }
    if (loss_trace) loss_trace->push_back(loss_and_gradient(data, m.weights, m.bias, cfg.l2, nullptr, nullptr));
    return m;
}

/// Training set = covered rows of the posterior.
inline SoftDataset soft_dataset(const Corpus& corpus, const Posterior& post) {
    SoftDataset d;
    for (std::size_t r = 0; r < post.size(); ++r) {
        if (!post.covered[r]) continue;
        d.x.push_back(&corpus.examples.at(post.rows[r]).features);
        d.q.push_back(post.p_pos[r]);
    }
    return d;
}

inline LinearModel train(const Corpus& corpus, const Posterior& post, const TrainConfig& cfg,
                         std::vector<double>* loss_trace = nullptr) {
    return train(soft_dataset(corpus, post), corpus.feature_dim, cfg, loss_trace);
}

struct Prediction {
    Label label;
    double score;
};

/// Score >= 0.5 predicts +1.
inline Prediction predict(const LinearModel& m, const Example& x) noexcept {
    double s = m.score(x.features);
    return {s >= 0.5 ? Label::positive : Label::negative, s};
}

inline Predictions predict_all(const LinearModel& m, const Corpus& corpus) {
    Predictions p(corpus.size(), Label::positive);
    for (const auto& x : corpus.examples) p[x.id] = predict(m, x).label;
    return p;
}

enum class Metric { accuracy, f1 };

inline Metric parse_metric(const std::string& s) {
    if (s == "accuracy") return Metric::accuracy;
    if (s == "f1") return Metric::f1;
    throw ConfigError("unknown metric '" + s + "'");
}
inline std::string to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "f1"; }

inline double score_labels(const std::vector<Label>& predicted, const std::vector<Label>& gold, Metric metric,
                           Label positive = Label::positive) {
    if (predicted.empty()) throw Error("cannot evaluate on an empty split");
    std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == gold[i]) ++correct;
        bool pp = predicted[i] == positive, gp = gold[i] == positive;
        if (pp && gp) ++tp;
        else if (pp) ++fp;
        else if (gp) ++fn;
    }
    if (metric == Metric::accuracy) return static_cast<double>(correct) / static_cast<double>(predicted.size());
    if (tp == 0) return 0.0;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

inline double evaluate(const LinearModel& m, const Corpus& corpus, const std::vector<ExampleId>& split,
                       Metric metric, Label positive = Label::positive) {
    if (split.empty()) throw Error("cannot evaluate on an empty split");
    std::vector<Label> pred, gold;
    pred.reserve(split.size());
    gold.reserve(split.size());
    for (auto i : split) {
        const auto& x = corpus.examples.at(i);
        if (!x.gold) throw Error("evaluation requires gold labels (example " + std::to_string(i) + ")");
        pred.push_back(predict(m, x).label);
        gold.push_back(*x.gold);
    }
    return score_labels(pred, gold, metric, positive);
}

}  // namespace idp
