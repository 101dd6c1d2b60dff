#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcl/data.hpp"
#include "dcl/encoder.hpp"
#include "dcl/error.hpp"
#include "dcl/losses.hpp"
#include "dcl/metrics.hpp"
#include "dcl/numkit.hpp"

namespace dcl {

enum class Schedule { joint, staged, staged_reversed };
enum class Ablation { none, no_self, no_sup };

struct TrainConfig {
    double tau_se = 0.1;
    double tau_su = 0.05;
    double alpha = 0.3;
    double gamma = 2.0;
    double lambda = 1.0;
    double dropout_rate = 0.5;
    double learning_rate = 1e-4;
    // Counted in sentences, i.e. N before augmentation.
    std::size_t batch_size = 128;
    std::size_t epochs = 10;
    Schedule schedule = Schedule::joint;
    // Epoch at which staged schedules switch terms; unset means epochs / 2.
    std::optional<std::size_t> stage_boundary;
    Ablation ablation = Ablation::none;
    std::uint64_t seed = 0;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;

    bool mean_reduction = false;
    bool use_bias = false;
    // Trains a d x d linear map (initialized to identity) between the frozen
    // pooled vector and dropout, so the contrastive terms shape the
    // representation instead of only being reported.
    bool trainable_projection = false;

    std::size_t hash_buckets = 64;
    std::size_t ngram_window = 3;
    ReportMetric report_metric = ReportMetric::macro_f1;

    // Throws usage errors naming the offending field.
    void validate() const;
    std::size_t effective_stage_boundary() const;
    LossSettings loss_settings() const;

    // Flat key = value text; keys are the field names above.
    void set(const std::string& key, const std::string& value);
    std::vector<std::pair<std::string, std::string>> to_key_values() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

TrainConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
TrainConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const TrainConfig& config);

TermFlags schedule_terms(const TrainConfig& config, std::size_t epoch);

// One shuffled pass over `count` items as index batches. A trailing batch
// with a single item is merged into the previous one.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, Rng& rng);

struct AdamWOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

struct MomentBuffers {
    std::string name;
    Vector first;
    Vector second;

    friend bool operator==(const MomentBuffers&, const MomentBuffers&) = default;
};

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<MomentBuffers> moments;  // parallel to the parameter list

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Parameter {
    std::string name;
    std::span<double> values;
    std::span<const double> grad;
};

// Decoupled-weight-decay Adam with bias correction. All gradients are checked
// for finiteness before any parameter is touched.
void adamw_step(std::span<const Parameter> params, OptimizerState& state, const AdamWOptions& options);

struct EpochReport {
    std::size_t epoch = 0;
    LossBreakdown loss;  // mean over the epoch's batches
    double seconds = 0.0;
    Metrics train_metrics;
    std::optional<Metrics> validation;
};

// Where sentence vectors came from at training time.
struct FeatureSpec {
    bool from_store = false;
    std::size_t dim = 0;
    HashFeaturizerConfig hash;

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct TrainedModel {
    ClassifierHead head;
    std::optional<Matrix> projection;  // d x d, applied as P x
    FeatureSpec features;
    TrainConfig config;
    OptimizerState optimizer;
    std::vector<EpochReport> history;

    std::size_t epochs_completed() const noexcept { return history.size(); }

    // Classification-time representation of a pooled sentence vector.
    Vector represent(std::span<const double> pooled) const;
    int classify(std::span<const double> pooled) const;
};

class TrainingAborted : public Error {
public:
    TrainingAborted(const std::string& message, std::vector<EpochReport> history)
        : Error(ErrorKind::numerical, message), history_(std::move(history)) {}

    const std::vector<EpochReport>& history() const noexcept { return history_; }

private:
    std::vector<EpochReport> history_;
};

// Pooled sentence vectors for every record, in dataset order.
std::vector<Vector> encode_dataset(const Dataset& dataset, const SentenceEncoder& encoder);

SentenceEncoder make_encoder(const TrainConfig& config, const EmbeddingStore* store);

using EpochCallback = std::function<void(const EpochReport&)>;

struct TrainOptions {
    const Dataset* validation = nullptr;
    const EmbeddingStore* store = nullptr;  // null selects the hashing featurizer
    EpochCallback on_epoch;
    // Continue from a checkpoint; the remaining epochs up to config.epochs run.
    const TrainedModel* resume = nullptr;
};

TrainedModel train(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options = {});

// Lower-level entry used by train(): vectors already pooled.
TrainedModel train_on_vectors(std::span<const Vector> vectors, std::span<const int> labels,
                              std::span<const std::string> ids, const TrainConfig& config,
                              const FeatureSpec& features, const TrainOptions& options = {},
                              std::span<const Vector> validation_vectors = {},
                              std::span<const int> validation_labels = {});

Metrics evaluate_vectors(const TrainedModel& model, std::span<const Vector> vectors, std::span<const int> labels);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dcl
