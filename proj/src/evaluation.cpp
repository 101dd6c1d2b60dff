#include "dcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <mutex>
#include <thread>

#include "text_util.hpp"

namespace dcl {

SentenceEncoder model_encoder(const TrainedModel& model, const EmbeddingStore* store) {
    if (model.features.from_store) {
        if (store == nullptr) throw usage_error("this model was trained on precomputed embeddings; supply them");
        if (store->dim() != model.features.dim) {
            throw data_error("embedding dimension " + std::to_string(store->dim()) + " does not match the model's " +
                             std::to_string(model.features.dim));
        }
        return SentenceEncoder(*store);
    }
    return SentenceEncoder(model.features.hash);
}

std::vector<int> predict_labels(const TrainedModel& model, const Dataset& dataset, const EmbeddingStore* store) {
    const SentenceEncoder encoder = model_encoder(model, store);
    std::vector<int> out;
    out.reserve(dataset.size());
    for (const SentenceRecord& r : dataset.records) out.push_back(model.classify(encoder.encode(r.id, r.text)));
    return out;
}

Metrics evaluate(const TrainedModel& model, const Dataset& dataset, const EmbeddingStore* store) {
    if (dataset.empty()) throw data_error("cannot evaluate on an empty dataset");
    return metrics(confusion(predict_labels(model, dataset, store), dataset.labels()));
}

SubsetEvaluation eval_subset(const TrainedModel& model, const Dataset& dataset, const Lexicon& lexicon,
                             const EmbeddingStore* store) {
    Dataset subset;
    subset.name = dataset.name + "-lexicon";
    for (const SentenceRecord& r : dataset.records) {
        if (lexicon_match(r, lexicon)) subset.records.push_back(r);
    }
    if (subset.empty()) throw data_error("no lexicon matches");
    return {evaluate(model, subset, store), subset.size()};
}

std::uint64_t fold_seed(std::uint64_t master_seed, std::size_t fold) {
    return mix64(master_seed ^ mix64(0xf01dULL + fold));
}

namespace {

Summary summarize(const std::vector<Metrics>& folds, double Metrics::*field) {
    Summary s;
    for (const Metrics& m : folds) s.mean += m.*field;
    s.mean /= static_cast<double>(folds.size());
    double var = 0.0;
    for (const Metrics& m : folds) var += (m.*field - s.mean) * (m.*field - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(folds.size()));
    return s;
}

}  // namespace

CrossValResult crossval(const Dataset& dataset, const TrainConfig& config, std::size_t k, const EmbeddingStore* store,
                        std::size_t jobs) {
    config.validate();
    validate_dataset(dataset);
    const FoldPlan plan = stratified_kfold(dataset, k, config.seed);

    CrossValResult result;
    result.folds.resize(k);
    const auto run_fold = [&](std::size_t fold) {
        auto [training, held_out] = split_fold(dataset, plan, fold);
        // Canonical order so results do not depend on the input file's order.
        std::sort(training.records.begin(), training.records.end(),
                  [](const SentenceRecord& a, const SentenceRecord& b) { return a.id < b.id; });
        TrainConfig fold_config = config;
        fold_config.seed = fold_seed(config.seed, fold);
        TrainOptions options;
        options.store = store;
        const TrainedModel model = train(training, fold_config, options);
        result.folds[fold] = evaluate(model, held_out, store);
    };

    if (jobs <= 1) {
        for (std::size_t fold = 0; fold < k; ++fold) run_fold(fold);
    } else {
        std::vector<std::future<void>> pending;
        std::size_t next = 0;
        std::mutex next_mutex;
        const auto worker = [&] {
            for (;;) {
                std::size_t fold;
                {
                    std::lock_guard lock(next_mutex);
                    if (next >= k) return;
                    fold = next++;
                }
                run_fold(fold);
            }
        };
        for (std::size_t t = 0; t < std::min(jobs, k); ++t) pending.push_back(std::async(std::launch::async, worker));
        for (auto& f : pending) f.get();
    }

    result.accuracy = summarize(result.folds, &Metrics::accuracy);
    result.macro_f1 = summarize(result.folds, &Metrics::macro_f1);
    result.weighted_f1 = summarize(result.folds, &Metrics::weighted_f1);
    return result;
}

void export_embeddings(const TrainedModel& model, const Dataset& dataset, const std::filesystem::path& path,
                       const EmbeddingStore* store) {
    const SentenceEncoder encoder = model_encoder(model, store);
    std::ofstream out(path);
    if (!out) throw data_error("cannot write embedding export " + path.string());
    out << "id\tlabel\tpred\tdim=" << model.head.input_dim() << '\n';
    for (const SentenceRecord& r : dataset.records) {
        const Vector z = model.represent(encoder.encode(r.id, r.text));
        out << r.id << '\t' << r.label << '\t' << predicted_class(model.head, z) << '\t';
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (i != 0) out << ' ';
            out << format_double(z[i]);
        }
        out << '\n';
    }
    if (!out) throw data_error("failed writing embedding export " + path.string());
}

std::vector<ExportedEmbedding> read_exported_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open embedding export " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error(path.string() + ": missing header");
    const auto header = detail::split(line, '\t');
    std::size_t dim = 0;
    if (header.size() != 4 || !header[3].starts_with("dim=") || !detail::parse_size(header[3].substr(4), dim)) {
        throw data_error(path.string() + ":1: expected 'id TAB label TAB pred TAB dim=<d>'");
    }
    std::vector<ExportedEmbedding> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 4) throw data_error(where + ": expected 4 tab-separated fields");
        ExportedEmbedding row;
        row.id = std::string(fields[0]);
        row.label = parse_label(fields[1]);
        row.predicted = parse_label(fields[2]);
        const auto numbers = detail::split_whitespace(fields[3]);
        if (numbers.size() != dim) throw data_error(where + ": expected " + std::to_string(dim) + " values");
        row.vector.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            if (!parse_double(numbers[i], row.vector[i])) throw data_error(where + ": malformed number");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dcl
