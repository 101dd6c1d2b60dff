#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dcl/data.hpp"
#include "dcl/encoder.hpp"
#include "dcl/metrics.hpp"
#include "dcl/trainer.hpp"

namespace dcl {

// Encoder matching the feature source recorded in the model. `store` must be
// supplied for store-trained models.
SentenceEncoder model_encoder(const TrainedModel& model, const EmbeddingStore* store);

std::vector<int> predict_labels(const TrainedModel& model, const Dataset& dataset, const EmbeddingStore* store);

Metrics evaluate(const TrainedModel& model, const Dataset& dataset, const EmbeddingStore* store = nullptr);

struct SubsetEvaluation {
    Metrics metrics;
    std::size_t subset_size = 0;
};

// Metrics over the records that contain a lexicon term.
SubsetEvaluation eval_subset(const TrainedModel& model, const Dataset& dataset, const Lexicon& lexicon,
                             const EmbeddingStore* store = nullptr);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over folds
};

struct CrossValResult {
    std::vector<Metrics> folds;
    Summary accuracy;
    Summary macro_f1;
    Summary weighted_f1;
};

// Seed of the model trained with fold `fold` held out.
std::uint64_t fold_seed(std::uint64_t master_seed, std::size_t fold);

// Stratified k-fold: fold i's model trains on the other folds and is scored
// on fold i. Metrics are averaged per fold. jobs > 1 trains folds on worker
// threads; results do not depend on it.
CrossValResult crossval(const Dataset& dataset, const TrainConfig& config, std::size_t k = 5,
                        const EmbeddingStore* store = nullptr, std::size_t jobs = 1);

// Header "id TAB label TAB pred TAB dim=<d>", then
// "id TAB y TAB y_hat TAB <d floats>" with the classification-view vector.
void export_embeddings(const TrainedModel& model, const Dataset& dataset, const std::filesystem::path& path,
                       const EmbeddingStore* store = nullptr);

struct ExportedEmbedding {
    std::string id;
    int label = 0;
    int predicted = 0;
    Vector vector;
};

std::vector<ExportedEmbedding> read_exported_embeddings(const std::filesystem::path& path);

}  // namespace dcl
