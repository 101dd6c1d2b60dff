#pragma once

// Dense double-precision primitives shared by every other module.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dcl {

using Vector = std::vector<double>;

// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Counter-based SplitMix64 stream. Output depends only on (seed, counter),
// so streams are identical on every platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    // Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, bound); bound must be > 0. Unbiased (rejection).
    std::uint64_t below(std::uint64_t bound) noexcept;
    // Standard normal via Box-Muller.
    double normal() noexcept;

    // Independent child stream keyed by `stream`; does not advance this one.
    Rng derive(std::uint64_t stream) const noexcept;

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

// Platform-stable Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
bool all_finite(std::span<const double> v) noexcept;

double logsumexp(std::span<const double> values);
Vector softmax(std::span<const double> logits);

inline constexpr double kNormEpsilon = 1e-12;

double cosine_sim(std::span<const double> u, std::span<const double> v);

// Gradient of cosine_sim(u, v) with respect to u, scaled by `scale` and
// accumulated into `out`.
void accumulate_cosine_grad(std::span<const double> u, std::span<const double> v,
                            double scale, std::span<double> out);

// Inverted dropout: zero each coordinate with probability `rate`, scale
// survivors by 1/(1 - rate).
Vector apply_dropout(std::span<const double> v, double rate, Rng& rng);

// Same draw as apply_dropout but also reports the keep-mask (1 kept, 0 dropped).
Vector apply_dropout(std::span<const double> v, double rate, Rng& rng, std::vector<std::uint8_t>& mask);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h);

}  // namespace dcl
