#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace dcl {

// Positive class = hate (label 1).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> truth);

// Per-class arrays are indexed by class id (0 = non-hate, 1 = hate).
// Any 0/0 ratio is reported as 0.
struct Metrics {
    double accuracy = 0.0;
    std::array<double, 2> precision{};
    std::array<double, 2> recall{};
    std::array<double, 2> f1{};
    std::array<std::size_t, 2> support{};
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    ConfusionMatrix counts;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics metrics(const ConfusionMatrix& cm);

enum class ReportMetric { macro_f1, weighted_f1 };

inline double headline(const Metrics& m, ReportMetric which) {
    return which == ReportMetric::macro_f1 ? m.macro_f1 : m.weighted_f1;
}

}  // namespace dcl
