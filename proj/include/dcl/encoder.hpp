#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dcl/numkit.hpp"

namespace dcl {

// Emb(x): one row per token, d_emb columns.
using TokenEmbeddingMatrix = Matrix;
using SentenceVector = Vector;

// Two dropout views of one pooled sentence vector. view_a is the
// classification view.
struct AugmentedPair {
    SentenceVector view_a;
    SentenceVector view_b;
    std::string source_id;
};

inline constexpr std::size_t kNumClasses = 2;

// Linear softmax classifier: logits = z W (+ b when the bias is enabled).
struct ClassifierHead {
    Matrix weights;  // d_emb x kNumClasses
    Vector bias;     // empty unless enabled

    std::size_t input_dim() const noexcept { return weights.rows(); }
    bool has_bias() const noexcept { return !bias.empty(); }

    // Uniform in [-1/sqrt(d), 1/sqrt(d)); bias starts at zero.
    static ClassifierHead initialize(std::size_t input_dim, bool with_bias, Rng& rng);
};

Vector head_logits(const ClassifierHead& head, std::span<const double> z);
Vector predict(const ClassifierHead& head, std::span<const double> z);
// Argmax with ties resolved toward class 0.
int predicted_class(const ClassifierHead& head, std::span<const double> z);

struct HashFeaturizerConfig {
    std::size_t buckets = 64;
    // Largest character n-gram length; n-grams of length 2..window plus the
    // whole token are hashed.
    std::size_t window = 3;

    friend bool operator==(const HashFeaturizerConfig&, const HashFeaturizerConfig&) = default;
};

TokenEmbeddingMatrix hash_featurize(std::string_view text, std::size_t buckets, std::size_t window);

SentenceVector max_pool(const TokenEmbeddingMatrix& emb);

// Keep-masks of the two views (1 kept, 0 dropped).
struct DropoutMasks {
    std::vector<std::uint8_t> a;
    std::vector<std::uint8_t> b;
};

// Two independent inverted-dropout draws of v. A view that collapses to the
// zero vector is redrawn once before failing.
AugmentedPair augment(std::span<const double> v, double rate, Rng& rng, std::string source_id = {},
                      DropoutMasks* masks = nullptr);

// Precomputed token embeddings keyed by sentence id.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(const std::string& id) const { return entries_.contains(id); }
    const TokenEmbeddingMatrix& at(const std::string& id) const;

    void insert(std::string id, TokenEmbeddingMatrix emb);

    const std::map<std::string, TokenEmbeddingMatrix>& entries() const noexcept { return entries_; }

private:
    std::size_t dim_ = 0;
    std::map<std::string, TokenEmbeddingMatrix> entries_;
};

// Text format:
//   dim=<d>
//   <id> TAB <n> TAB <n*d floats, space separated, row-major>
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

// Where sentence vectors come from: the hashing featurizer over raw text, or
// a precomputed store looked up by id. Either way the result is max-pooled.
class SentenceEncoder {
public:
    explicit SentenceEncoder(HashFeaturizerConfig config) : hash_(config) {}
    explicit SentenceEncoder(const EmbeddingStore& store) : store_(&store) {}

    std::size_t dim() const noexcept { return store_ != nullptr ? store_->dim() : hash_.buckets; }
    bool uses_store() const noexcept { return store_ != nullptr; }
    const HashFeaturizerConfig& hash_config() const noexcept { return hash_; }

    SentenceVector encode(const std::string& id, std::string_view text) const;

private:
    HashFeaturizerConfig hash_{};
    const EmbeddingStore* store_ = nullptr;
};

// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double value);
// Strict full-token parse; returns false on garbage or trailing characters.
bool parse_double(std::string_view text, double& out);

}  // namespace dcl
