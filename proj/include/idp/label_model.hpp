#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "lf.hpp"

namespace idp {

enum class LabelModelKind { majority, weighted_em };

inline LabelModelKind parse_label_model_kind(const std::string& s) {
    if (s == "majority") return LabelModelKind::majority;
    if (s == "weighted-em") return LabelModelKind::weighted_em;
    throw ConfigError("unknown label_model.kind '" + s + "'");
}
inline std::string to_string(LabelModelKind k) {
    return k == LabelModelKind::majority ? "majority" : "weighted-em";
}

struct LabelModelConfig {
    LabelModelKind kind = LabelModelKind::majority;
    double prior_positive = 0.5;
    int em_iters = 100;
    double em_tol = 1e-10;
    double smoothing = 1.0;

    void validate() const {
        if (!(prior_positive > 0.0 && prior_positive < 1.0))
            throw ConfigError("label_model.prior_positive must lie in (0, 1)");
        if (em_iters < 1) throw ConfigError("label_model.em_iters must be >= 1");
        if (!(em_tol >= 0.0)) throw ConfigError("label_model.em_tol must be >= 0");
        if (!(smoothing >= 0.0)) throw ConfigError("label_model.smoothing must be >= 0");
    }
};

inline constexpr double kAccuracyFloor = 0.05;
inline constexpr double kAccuracyCeil = 0.95;

/// Shannon entropy in nats of (p, 1-p), with 0 ln 0 = 0.
inline double binary_entropy(double p_pos, double p_neg) noexcept {
    double h = 0.0;
    if (p_pos > 0.0) h -= p_pos * std::log(p_pos);
    if (p_neg > 0.0) h -= p_neg * std::log(p_neg);
    return h < 0.0 ? 0.0 : h;
}

struct Posterior {
    std::vector<ExampleId> rows;
    std::vector<double> p_pos, p_neg, uncertainty;
    std::vector<char> covered;

    std::size_t size() const noexcept { return rows.size(); }
    double prob(std::size_t r, Label y) const { return y == Label::positive ? p_pos[r] : p_neg[r]; }
};

inline double uncertainty(const Posterior& post, std::size_t row) { return post.uncertainty.at(row); }

struct LabelModelFit {
    Posterior posterior;
    std::vector<double> accuracies;  // per column; empty for majority
    std::vector<double> objective;   // EM: penalized log-likelihood after each iteration
    std::vector<double> log_likelihood;
    int iterations = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline Posterior empty_posterior(const LabelMatrix& m) {
    Posterior p;
    p.rows = m.rows;
    const auto n = m.n_rows();
    p.p_pos.assign(n, 0.0);
    p.p_neg.assign(n, 0.0);
    p.uncertainty.assign(n, 0.0);
    p.covered.assign(n, 0);
    return p;
}

inline void set_row(Posterior& p, std::size_t r, double pos, double neg, bool covered) {
    p.p_pos[r] = pos;
    p.p_neg[r] = neg;
    p.uncertainty[r] = binary_entropy(pos, neg);
    p.covered[r] = covered ? 1 : 0;
}

/// Normalizes two log-weights into probabilities, symmetric in its arguments.
inline std::pair<double, double> softmax2(double lp, double ln) {
    double m = std::max(lp, ln);
    double ep = std::exp(lp - m), en = std::exp(ln - m);
    double z = ep + en;
    return {ep / z, en / z};
}

}  // namespace detail

inline Posterior majority_posterior(const LabelMatrix& m, const LabelModelConfig& cfg) {
    auto post = detail::empty_posterior(m);
    const double s = cfg.smoothing;
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        int cp = 0, cn = 0;
        for (auto v : m.row(r)) {
            if (v > 0) ++cp;
            else if (v < 0) ++cn;
        }
        if (cp + cn == 0) {
            detail::set_row(post, r, cfg.prior_positive, 1.0 - cfg.prior_positive, false);
            continue;
        }
        double den = static_cast<double>(cp + cn) + 2.0 * s;
        detail::set_row(post, r, (cp + s) / den, (cn + s) / den, true);
    }
    return post;
}

/// One-coin posterior for fixed per-column accuracies.
inline Posterior posterior_from_accuracies(const LabelMatrix& m, const std::vector<double>& acc,
                                           double prior_positive, double* log_likelihood = nullptr) {
    auto post = detail::empty_posterior(m);
    std::vector<double> la(acc.size()), lna(acc.size());
    for (std::size_t j = 0; j < acc.size(); ++j) {
        la[j] = std::log(acc[j]);
        lna[j] = std::log1p(-acc[j]);
    }
    const double lp0 = std::log(prior_positive), ln0 = std::log(1.0 - prior_positive);
    double ll = 0.0;
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        double lp = lp0, ln = ln0;
        bool covered = false;
        auto row = m.row(r);
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (row[j] == 0) continue;
            covered = true;
            if (row[j] > 0) {
                lp += la[j];
                ln += lna[j];
            } else {
                lp += lna[j];
                ln += la[j];
            }
        }
        if (!covered) {
            detail::set_row(post, r, prior_positive, 1.0 - prior_positive, false);
            continue;
        }
        double mx = std::max(lp, ln);
        ll += mx + std::log(std::exp(lp - mx) + std::exp(ln - mx));
        auto [pp, pn] = detail::softmax2(lp, ln);
        detail::set_row(post, r, pp, pn, true);
    }
    if (log_likelihood) *log_likelihood = ll;
    return post;
}

/// Smoothed expected agreement of each column with the soft labels, clamped.
inline std::vector<double> m_step(const LabelMatrix& m, const Posterior& q, double s) {
    std::vector<double> agree(m.cols, 0.0), count(m.cols, 0.0);
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (row[j] == 0) continue;
            agree[j] += row[j] > 0 ? q.p_pos[r] : q.p_neg[r];
            count[j] += 1.0;
        }
    }
    std::vector<double> acc(m.cols);
    for (std::size_t j = 0; j < m.cols; ++j) {
        const double den = count[j] + 2.0 * s;
        acc[j] = den > 0.0 ? std::clamp((agree[j] + s) / den, kAccuracyFloor, kAccuracyCeil) : 0.5;
    }
    return acc;
}

/// Log-likelihood plus the Beta(s+1, s+1) log-prior on each accuracy; the
/// quantity EM with smoothed M-steps ascends. With s = 0 it is the plain
/// log-likelihood; with s > 0 the plain log-likelihood alone can dip.
inline double em_objective(double log_likelihood, const std::vector<double>& acc, double s) {
    double obj = log_likelihood;
    for (double a : acc) obj += s * (std::log(a) + std::log1p(-a));
    return obj;
}

inline LabelModelFit fit_label_model(const LabelMatrix& m, const LabelModelConfig& cfg) {
    cfg.validate();
    LabelModelFit fit;
    auto majority = majority_posterior(m, cfg);
    bool any = std::any_of(majority.covered.begin(), majority.covered.end(), [](char c) { return c; });
    if (!any) fit.warnings.push_back("all rows abstain; posterior equals the prior");
    if (cfg.kind == LabelModelKind::majority || m.cols == 0 || !any) {
        fit.posterior = std::move(majority);
        return fit;
    }
    auto acc = m_step(m, majority, cfg.smoothing);
    double ll = 0.0;
    auto post = posterior_from_accuracies(m, acc, cfg.prior_positive, &ll);
    double prev = em_objective(ll, acc, cfg.smoothing);
    fit.objective.push_back(prev);
    fit.log_likelihood.push_back(ll);
    for (int it = 0; it < cfg.em_iters; ++it) {
        acc = m_step(m, post, cfg.smoothing);
        post = posterior_from_accuracies(m, acc, cfg.prior_positive, &ll);
        double obj = em_objective(ll, acc, cfg.smoothing);
        fit.objective.push_back(obj);
        fit.log_likelihood.push_back(ll);
        ++fit.iterations;
        if (obj - prev <= cfg.em_tol) break;
        prev = obj;
    }
    fit.posterior = std::move(post);
    fit.accuracies = std::move(acc);
    return fit;
}

inline Posterior fit_posterior(const LabelMatrix& m, const LabelModelConfig& cfg) {
    return fit_label_model(m, cfg).posterior;
}

/// Applies a fitted model to another matrix with the same columns.
inline Posterior apply_label_model(const LabelModelFit& fit, const LabelMatrix& m,
                                   const LabelModelConfig& cfg) {
    if (fit.accuracies.empty()) return majority_posterior(m, cfg);
    return posterior_from_accuracies(m, fit.accuracies, cfg.prior_positive);
}

inline void write_posterior_csv(std::ostream& out, const Posterior& p) {
    out << "id,p_pos,uncertainty,covered\n";
    char buf[96];
    for (std::size_t r = 0; r < p.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%d\n", p.rows[r], p.p_pos[r], p.uncertainty[r],
                      p.covered[r] ? 1 : 0);
        out << buf;
    }
}

}  // namespace idp
