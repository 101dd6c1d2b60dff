#include "dcl/metrics.hpp"

#include <string>

#include "dcl/error.hpp"

namespace dcl {

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size()) {
        throw usage_error("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(truth.size()) + " labels");
    }
    if (truth.empty()) throw usage_error("confusion: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pred = predictions[i] == 1;
        const bool real = truth[i] == 1;
        if (pred && real) ++cm.tp;
        else if (pred) ++cm.fp;
        else if (real) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw usage_error("metrics: empty confusion matrix");
    Metrics m;
    m.counts = cm;
    m.accuracy = ratio(cm.tp + cm.tn, total);
    m.support = {cm.tn + cm.fp, cm.tp + cm.fn};

    m.precision[1] = ratio(cm.tp, cm.tp + cm.fp);
    m.recall[1] = ratio(cm.tp, cm.tp + cm.fn);
    m.precision[0] = ratio(cm.tn, cm.tn + cm.fn);
    m.recall[0] = ratio(cm.tn, cm.tn + cm.fp);
    for (int c = 0; c < 2; ++c) m.f1[c] = f1_score(m.precision[c], m.recall[c]);

    m.macro_f1 = 0.5 * (m.f1[0] + m.f1[1]);
    // Equal supports reduce to the macro mean; take it verbatim so the two agree bitwise.
    m.weighted_f1 = m.support[0] == m.support[1]
                        ? m.macro_f1
                        : (static_cast<double>(m.support[0]) * m.f1[0] + static_cast<double>(m.support[1]) * m.f1[1]) /
                              static_cast<double>(total);
    return m;
}

}  // namespace dcl
