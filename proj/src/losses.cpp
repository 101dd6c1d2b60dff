#include "dcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dcl/error.hpp"

namespace dcl {

namespace {

struct Positive {
    std::size_t index;
    double weight;
};

// Sum over anchors i of  logsumexp_{k != i}(S_ik / tau) - sum_p w_p S_ip / tau.
// positives[i] lists the positive indices of anchor i with weights summing
// to one; an empty list skips the anchor.
double contrastive_sum(std::span<const std::span<const double>> views, double tau,
                       const std::vector<std::vector<Positive>>& positives, std::vector<Vector>& grads) {
    const std::size_t m = views.size();
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        norms[i] = norm(views[i]);
        if (norms[i] <= kNormEpsilon) throw numerical_error("degenerate vector");
    }
    Matrix sim(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        sim(i, i) = 1.0;
        for (std::size_t k = i + 1; k < m; ++k) {
            sim(i, k) = sim(k, i) = cosine_sim(views[i], views[k]);
        }
    }

    // dL/dS, accumulated symmetrically since S_ik = S_ki.
    Matrix coupling(m, m, 0.0);
    double total = 0.0;
    Vector logits;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < m; ++i) {
        if (positives[i].empty()) continue;
        logits.clear();
        others.clear();
        for (std::size_t k = 0; k < m; ++k) {
            if (k == i) continue;
            logits.push_back(sim(i, k) / tau);
            others.push_back(k);
        }
        const auto max_it = std::max_element(logits.begin(), logits.end());
        const double top = *max_it;
        double rest = 0.0;
        for (auto it = logits.begin(); it != logits.end(); ++it) {
            if (it != max_it) rest += std::exp(*it - top);
        }
        double positive_logit = 0.0;
        for (const Positive& p : positives[i]) positive_logit += p.weight * sim(i, p.index) / tau;
        // lse - positive, arranged so both parts are nonnegative.
        total += (top - positive_logit) + std::log1p(rest);

        const double denom = 1.0 + rest;
        for (std::size_t t = 0; t < others.size(); ++t) {
            const double share = std::exp(logits[t] - top) / denom;
            coupling(i, others[t]) += share / tau;
            coupling(others[t], i) += share / tau;
        }
        for (const Positive& p : positives[i]) {
            coupling(i, p.index) -= p.weight / tau;
            coupling(p.index, i) -= p.weight / tau;
        }
    }

    // d cos(u, v) / du = (v/|v| - cos * u/|u|) / |u|
    grads.assign(m, Vector());
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t d = views[i].size();
        Vector& g = grads[i];
        g.assign(d, 0.0);
        double self_coeff = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k == i) continue;
            const double c = coupling(i, k);
            if (c == 0.0) continue;
            const double scale = c / (norms[i] * norms[k]);
            for (std::size_t r = 0; r < d; ++r) g[r] += scale * views[k][r];
            self_coeff += c * sim(i, k);
        }
        const double self_scale = self_coeff / (norms[i] * norms[i]);
        for (std::size_t r = 0; r < d; ++r) g[r] -= self_scale * views[i][r];
    }
    return total;
}

void check_temperature(double tau, const char* name) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw usage_error(std::string(name) + " must be a positive finite temperature");
    }
}

void check_dims(std::span<const std::span<const double>> views) {
    for (const auto& v : views) {
        if (v.size() != views.front().size()) throw usage_error("view dimensions differ within the batch");
    }
}

}  // namespace

ContrastiveResult cl_se(std::span<const AugmentedPair> pairs, double tau_se) {
    check_temperature(tau_se, "tau_se");
    if (pairs.empty()) throw usage_error("cl_se needs at least one pair");
    std::vector<std::span<const double>> views;
    views.reserve(2 * pairs.size());
    for (const AugmentedPair& p : pairs) {
        views.emplace_back(p.view_a);
        views.emplace_back(p.view_b);
    }
    check_dims(views);
    std::vector<std::vector<Positive>> positives(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) positives[i] = {{i ^ 1U, 1.0}};

    ContrastiveResult result;
    result.loss = contrastive_sum(views, tau_se, positives, result.grads);
    return result;
}

ContrastiveResult cl_su(std::span<const Vector> vectors, std::span<const int> labels, double tau_su) {
    check_temperature(tau_su, "tau_su");
    if (vectors.size() != labels.size()) {
        throw usage_error("cl_su got " + std::to_string(vectors.size()) + " vectors but " +
                          std::to_string(labels.size()) + " labels");
    }
    if (vectors.empty()) throw usage_error("cl_su needs at least one vector");
    std::vector<std::span<const double>> views(vectors.begin(), vectors.end());
    check_dims(views);

    std::map<int, std::size_t> class_count;
    for (int y : labels) ++class_count[y];
    std::vector<std::vector<Positive>> positives(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        const std::size_t same = class_count[labels[i]];
        if (same < 2) continue;
        const double w = 1.0 / static_cast<double>(same - 1);
        for (std::size_t j = 0; j < views.size(); ++j) {
            if (j != i && labels[j] == labels[i]) positives[i].push_back({j, w});
        }
    }

    ContrastiveResult result;
    result.loss = contrastive_sum(views, tau_su, positives, result.grads);
    return result;
}

FocalResult focal_loss(std::span<const double> probs, std::span<const int> labels, double alpha, double gamma) {
    if (probs.size() != labels.size()) throw usage_error("focal loss: probabilities and labels differ in length");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw usage_error("focal loss: alpha must lie in [0, 1]");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw usage_error("focal loss: gamma must be nonnegative");

    constexpr double kRangeSlack = 1e-12;
    FocalResult result;
    result.grads.assign(probs.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double raw = probs[i];
        if (!(raw >= -kRangeSlack && raw <= 1.0 + kRangeSlack)) {
            throw numerical_error("focal loss: probability " + std::to_string(raw) + " outside [0, 1]");
        }
        if (labels[i] != 0 && labels[i] != 1) throw usage_error("focal loss: labels must be 0 or 1");
        const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
        const bool positive = labels[i] == 1;
        const double p_hat = positive ? p : 1.0 - p;
        const double weight = positive ? alpha : 1.0 - alpha;
        const double miss = positive ? 1.0 - p : p;
        const double modulation = std::pow(miss, gamma);
        const double log_p = positive ? std::log(p) : std::log1p(-p);
        result.loss += weight * modulation * (-log_p);

        if (p != raw) continue;  // flat under the clamp
        // d/dp_hat of -w (1 - p_hat)^g log p_hat
        const double modulation_slope = gamma == 0.0 ? 0.0 : gamma * std::pow(miss, gamma - 1.0);
        const double d_phat = weight * (modulation_slope * log_p - modulation / p_hat);
        result.grads[i] = positive ? d_phat : -d_phat;
    }
    return result;
}

namespace {

struct MarginFocal {
    double loss = 0.0;
    double d_margin = 0.0;
};

// Focal term for a two-way softmax whose true-class logit exceeds the other by m.
MarginFocal focal_from_margin(double m, double weight, double gamma) {
    double p_hat, miss, log_p;
    if (m >= 0.0) {
        const double e = std::exp(-m);
        p_hat = 1.0 / (1.0 + e);
        miss = e / (1.0 + e);
        log_p = -std::log1p(e);
    } else {
        const double e = std::exp(m);
        p_hat = e / (1.0 + e);
        miss = 1.0 / (1.0 + e);
        log_p = m - std::log1p(e);
    }
    bool clamped = false;
    if (p_hat < kProbabilityClamp) {
        p_hat = kProbabilityClamp;
        miss = 1.0 - kProbabilityClamp;
        log_p = std::log(kProbabilityClamp);
        clamped = true;
    } else if (miss < kProbabilityClamp) {
        p_hat = 1.0 - kProbabilityClamp;
        miss = kProbabilityClamp;
        log_p = std::log1p(-kProbabilityClamp);
        clamped = true;
    }
    MarginFocal out;
    const double modulation = std::pow(miss, gamma);
    out.loss = weight * modulation * (-log_p);
    if (clamped) return out;
    const double modulation_slope = gamma == 0.0 ? 0.0 : gamma * std::pow(miss, gamma - 1.0);
    const double d_phat = weight * (modulation_slope * log_p - modulation / p_hat);
    out.d_margin = d_phat * p_hat * miss;  // dp_hat/dm = p_hat (1 - p_hat)
    return out;
}

}  // namespace

TotalLoss total_loss(std::span<const AugmentedPair> pairs, std::span<const int> labels,
                     const ClassifierHead& head, const LossSettings& settings, TermFlags flags) {
    const std::size_t n = pairs.size();
    if (n == 0) throw usage_error("empty batch");
    if (labels.size() != n) throw usage_error("batch has " + std::to_string(n) + " pairs but " +
                                             std::to_string(labels.size()) + " labels");
    if (!(settings.lambda >= 0.0) || !std::isfinite(settings.lambda)) throw usage_error("lambda must be nonnegative");
    const std::size_t d = head.input_dim();
    for (const AugmentedPair& p : pairs) {
        if (p.view_a.size() != d || p.view_b.size() != d) {
            throw usage_error("view dimension does not match the classifier input dimension");
        }
    }

    const double per_view = settings.mean_reduction ? 1.0 / static_cast<double>(2 * n) : 1.0;
    const double per_sample = settings.mean_reduction ? 1.0 / static_cast<double>(n) : 1.0;

    TotalLoss out;
    LossGradients& g = out.grads;
    g.d_vectors.assign(2 * n, Vector(d, 0.0));
    g.d_weights = Matrix(d, kNumClasses, 0.0);
    if (head.has_bias()) g.d_bias.assign(kNumClasses, 0.0);

    // Focal loss on the classification view, evaluated from the logit margin
    // so that neither p nor 1 - p is ever formed by cancellation.
    for (const int y : labels) {
        if (y != 0 && y != 1) throw usage_error("focal loss: labels must be 0 or 1");
    }
    if (!(settings.alpha >= 0.0 && settings.alpha <= 1.0)) throw usage_error("focal loss: alpha must lie in [0, 1]");
    if (!(settings.gamma >= 0.0) || !std::isfinite(settings.gamma)) {
        throw usage_error("focal loss: gamma must be nonnegative");
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Vector logits = head_logits(head, pairs[j].view_a);
        const int y = labels[j];
        const double weight = y == 1 ? settings.alpha : 1.0 - settings.alpha;
        const MarginFocal term = focal_from_margin(logits[y] - logits[1 - y], weight, settings.gamma);
        if (!std::isfinite(term.loss)) throw numerical_error("non-finite focal loss");
        out.breakdown.fl += term.loss * per_sample;
        const double dm = term.d_margin * per_sample;
        if (dm == 0.0) continue;
        double dlogit[kNumClasses];
        dlogit[y] = dm;
        dlogit[1 - y] = -dm;
        const Vector& z = pairs[j].view_a;
        Vector& dz = g.d_vectors[2 * j];
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < kNumClasses; ++c) {
                g.d_weights(r, c) += z[r] * dlogit[c];
                dz[r] += head.weights(r, c) * dlogit[c];
            }
        }
        if (head.has_bias()) {
            for (std::size_t c = 0; c < kNumClasses; ++c) g.d_bias[c] += dlogit[c];
        }
    }

    if (flags.use_cl_se) {
        const ContrastiveResult se = cl_se(pairs, settings.tau_se);
        out.breakdown.cl_se = se.loss * per_view;
        const double scale = settings.lambda * per_view;
        for (std::size_t v = 0; v < 2 * n; ++v) {
            for (std::size_t r = 0; r < d; ++r) g.d_vectors[v][r] += scale * se.grads[v][r];
        }
    }
    if (flags.use_cl_su) {
        std::vector<Vector> anchors;
        anchors.reserve(n);
        for (const AugmentedPair& p : pairs) anchors.push_back(p.view_a);
        const ContrastiveResult su = cl_su(anchors, labels, settings.tau_su);
        out.breakdown.cl_su = su.loss * per_sample;
        const double scale = settings.lambda * per_sample;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t r = 0; r < d; ++r) g.d_vectors[2 * j][r] += scale * su.grads[j][r];
        }
    }

    LossBreakdown& b = out.breakdown;
    b.cl = b.cl_se + b.cl_su;
    b.total = b.fl + settings.lambda * b.cl;
    return out;
}

}  // namespace dcl
