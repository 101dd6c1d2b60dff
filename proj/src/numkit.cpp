#include "dcl/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "dcl/error.hpp"

namespace dcl {

namespace {

WarningSink g_warning_sink = nullptr;
void* g_warning_user = nullptr;

}  // namespace

void set_warning_sink(WarningSink sink, void* user) {
    g_warning_sink = sink;
    g_warning_user = user;
}

void warn(const std::string& message) {
    if (g_warning_sink != nullptr) {
        g_warning_sink(message, g_warning_user);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw usage_error("matrix shape " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                          " does not match " + std::to_string(values_.size()) + " values");
    }
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
}

double Rng::normal() noexcept {
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::uint64_t stream) const noexcept {
    return Rng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw usage_error("dimension mismatch in dot product");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) throw usage_error("empty reduction");
    if (!all_finite(values)) throw numerical_error("non-finite value in logsumexp");
    const auto max_it = std::max_element(values.begin(), values.end());
    const double m = *max_it;
    // The max term contributes exactly 1; log1p keeps the remainder precise.
    double rest = 0.0;
    for (auto it = values.begin(); it != values.end(); ++it) {
        if (it != max_it) rest += std::exp(*it - m);
    }
    return m + std::log1p(rest);
}

Vector softmax(std::span<const double> logits) {
    const double lse = logsumexp(logits);
    Vector out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
    return out;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw usage_error("dimension mismatch in cosine similarity");
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu <= kNormEpsilon || nv <= kNormEpsilon) throw numerical_error("degenerate vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

void accumulate_cosine_grad(std::span<const double> u, std::span<const double> v, double scale,
                            std::span<double> out) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu <= kNormEpsilon || nv <= kNormEpsilon) throw numerical_error("degenerate vector");
    // d/du [u.v / (|u||v|)] = v / (|u||v|) - cos * u / |u|^2
    // Unclamped cosine here: the clamp only matters at |cos| = 1 where the
    // gradient is zero anyway.
    const double cos = dot(u, v) / (nu * nv);
    const double a = scale / (nu * nv);
    const double b = scale * cos / (nu * nu);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += a * v[i] - b * u[i];
}

Vector apply_dropout(std::span<const double> v, double rate, Rng& rng, std::vector<std::uint8_t>& mask) {
    if (!(rate >= 0.0)) throw usage_error("dropout rate must be in [0, 1)");
    if (rate >= 1.0) throw usage_error("degenerate dropout rate");
    Vector out(v.begin(), v.end());
    mask.assign(v.size(), 1);
    if (rate == 0.0) return out;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (rng.uniform() < rate) {
            out[i] = 0.0;
            mask[i] = 0;
        } else {
            out[i] *= keep_scale;
        }
    }
    return out;
}

Vector apply_dropout(std::span<const double> v, double rate, Rng& rng) {
    std::vector<std::uint8_t> mask;
    return apply_dropout(v, rate, rng, mask);
}

Vector finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h) {
    if (!(h > 0.0)) throw usage_error("finite difference step must be positive");
    Vector probe(x.begin(), x.end());
    Vector grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = f(probe);
        probe[i] = saved - h;
        const double down = f(probe);
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw numerical_error("non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace dcl
