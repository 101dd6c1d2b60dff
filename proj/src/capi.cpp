#include "dcl/dcl.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "dcl/data.hpp"
#include "dcl/encoder.hpp"
#include "dcl/evaluation.hpp"
#include "dcl/gradcheck.hpp"
#include "dcl/losses.hpp"
#include "dcl/trainer.hpp"

struct dcl_dataset {
    dcl::Dataset value;
};
struct dcl_lexicon {
    dcl::Lexicon value;
};
struct dcl_embeddings {
    dcl::EmbeddingStore value;
};
struct dcl_config {
    dcl::TrainConfig value;
};
struct dcl_model {
    dcl::TrainedModel value;
};

namespace {

thread_local std::string t_last_error;

dcl_warning_fn g_warning_fn = nullptr;

void forward_warning(const std::string& message, void* user) {
    if (g_warning_fn != nullptr) g_warning_fn(message.c_str(), user);
}

template <typename Fn>
dcl_status guarded(Fn&& fn) {
    try {
        t_last_error.clear();
        fn();
        return DCL_OK;
    } catch (const dcl::Error& e) {
        t_last_error = e.what();
        return static_cast<dcl_status>(static_cast<int>(e.kind()));
    } catch (const std::bad_alloc&) {
        t_last_error = "out of memory";
        return DCL_ERR_INTERNAL;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return DCL_ERR_INTERNAL;
    } catch (...) {
        t_last_error = "unknown error";
        return DCL_ERR_INTERNAL;
    }
}

void require_arg(bool ok, const char* what) {
    if (!ok) throw dcl::usage_error(std::string("null argument: ") + what);
}

dcl_metrics to_c(const dcl::Metrics& m) {
    dcl_metrics out{};
    out.accuracy = m.accuracy;
    for (int c = 0; c < 2; ++c) {
        out.precision[c] = m.precision[c];
        out.recall[c] = m.recall[c];
        out.f1[c] = m.f1[c];
        out.support[c] = m.support[c];
    }
    out.macro_f1 = m.macro_f1;
    out.weighted_f1 = m.weighted_f1;
    out.tp = m.counts.tp;
    out.fp = m.counts.fp;
    out.fn = m.counts.fn;
    out.tn = m.counts.tn;
    return out;
}

dcl_epoch_report to_c(const dcl::EpochReport& r) {
    dcl_epoch_report out{};
    out.epoch = r.epoch;
    out.loss = {r.loss.cl_se, r.loss.cl_su, r.loss.cl, r.loss.fl, r.loss.total};
    out.seconds = r.seconds;
    out.train = to_c(r.train_metrics);
    out.has_validation = r.validation.has_value() ? 1 : 0;
    if (r.validation) out.validation = to_c(*r.validation);
    return out;
}

const dcl::EmbeddingStore* store_of(const dcl_embeddings* e) { return e != nullptr ? &e->value : nullptr; }

}  // namespace

extern "C" {

const char* dcl_version(void) { return "1.0.0"; }

const char* dcl_last_error(void) { return t_last_error.c_str(); }

void dcl_set_warning_handler(dcl_warning_fn fn, void* user) {
    g_warning_fn = fn;
    dcl::set_warning_sink(fn != nullptr ? forward_warning : nullptr, user);
}

dcl_status dcl_dataset_load(const char* path, const char* format, dcl_dataset** out) {
    return guarded([&] {
        require_arg(path != nullptr && out != nullptr, "path/out");
        *out = nullptr;
        auto ds = std::make_unique<dcl_dataset>();
        if (format == nullptr) {
            ds->value = dcl::load_dataset(path);
        } else {
            const std::string f(format);
            dcl::DataFormat fmt;
            if (f == "csv") fmt = dcl::DataFormat::csv;
            else if (f == "tsv") fmt = dcl::DataFormat::tsv;
            else if (f == "jsonl") fmt = dcl::DataFormat::jsonl;
            else throw dcl::usage_error("unknown dataset format '" + f + "'");
            ds->value = dcl::load_dataset(path, fmt);
        }
        *out = ds.release();
    });
}

size_t dcl_dataset_size(const dcl_dataset* dataset) { return dataset != nullptr ? dataset->value.size() : 0; }

void dcl_dataset_free(dcl_dataset* dataset) { delete dataset; }

dcl_status dcl_lexicon_load(const char* path, dcl_lexicon** out) {
    return guarded([&] {
        require_arg(path != nullptr && out != nullptr, "path/out");
        *out = nullptr;
        *out = new dcl_lexicon{dcl::load_lexicon(path)};
    });
}

size_t dcl_lexicon_size(const dcl_lexicon* lexicon) { return lexicon != nullptr ? lexicon->value.size() : 0; }

void dcl_lexicon_free(dcl_lexicon* lexicon) { delete lexicon; }

dcl_status dcl_embeddings_load(const char* path, dcl_embeddings** out) {
    return guarded([&] {
        require_arg(path != nullptr && out != nullptr, "path/out");
        *out = nullptr;
        *out = new dcl_embeddings{dcl::load_embeddings(path)};
    });
}

size_t dcl_embeddings_size(const dcl_embeddings* embeddings) {
    return embeddings != nullptr ? embeddings->value.size() : 0;
}

size_t dcl_embeddings_dim(const dcl_embeddings* embeddings) {
    return embeddings != nullptr ? embeddings->value.dim() : 0;
}

void dcl_embeddings_free(dcl_embeddings* embeddings) { delete embeddings; }

dcl_status dcl_class_stats_compute(const dcl_dataset* dataset, const dcl_lexicon* lexicon, dcl_class_stats* out) {
    return guarded([&] {
        require_arg(dataset != nullptr && out != nullptr, "dataset/out");
        if (dataset->value.empty()) throw dcl::data_error("dataset is empty");
        const dcl::ClassStats s = dcl::class_stats(dataset->value, lexicon != nullptr ? &lexicon->value : nullptr);
        *out = {s.total,
                s.positives,
                s.negatives,
                s.positive_share,
                s.negatives_per_positive,
                s.has_lexicon ? 1 : 0,
                s.matched_positives,
                s.matched_negatives,
                s.matched_positive_pct,
                s.matched_negative_pct,
                s.matched_total_pct};
    });
}

dcl_status dcl_config_new(dcl_config** out) {
    return guarded([&] {
        require_arg(out != nullptr, "out");
        *out = new dcl_config{};
    });
}

dcl_status dcl_config_load(const char* path, dcl_config** out) {
    return guarded([&] {
        require_arg(path != nullptr && out != nullptr, "path/out");
        *out = nullptr;
        *out = new dcl_config{dcl::load_config(path)};
    });
}

dcl_status dcl_config_set(dcl_config* config, const char* key, const char* value) {
    return guarded([&] {
        require_arg(config != nullptr && key != nullptr && value != nullptr, "config/key/value");
        dcl::TrainConfig updated = config->value;
        updated.set(key, value);
        config->value = updated;
    });
}

dcl_status dcl_config_validate(const dcl_config* config) {
    return guarded([&] {
        require_arg(config != nullptr, "config");
        config->value.validate();
    });
}

size_t dcl_config_to_text(const dcl_config* config, char* buffer, size_t capacity) {
    if (config == nullptr) return 0;
    const std::string text = dcl::config_to_text(config->value);
    if (buffer != nullptr && capacity > 0) {
        const std::size_t n = std::min(capacity - 1, text.size());
        std::memcpy(buffer, text.data(), n);
        buffer[n] = '\0';
    }
    return text.size();
}

void dcl_config_free(dcl_config* config) { delete config; }

dcl_status dcl_train(const dcl_dataset* data, const dcl_config* config, const dcl_train_options* options,
                     dcl_model** out) {
    return guarded([&] {
        require_arg(data != nullptr && config != nullptr && out != nullptr, "data/config/out");
        *out = nullptr;
        dcl::TrainOptions opts;
        if (options != nullptr) {
            opts.validation = options->validation != nullptr ? &options->validation->value : nullptr;
            opts.store = store_of(options->embeddings);
            opts.resume = options->resume != nullptr ? &options->resume->value : nullptr;
            if (options->on_epoch != nullptr) {
                opts.on_epoch = [cb = options->on_epoch, user = options->user](const dcl::EpochReport& r) {
                    const dcl_epoch_report c = to_c(r);
                    cb(&c, user);
                };
            }
        }
        *out = new dcl_model{dcl::train(data->value, config->value, opts)};
    });
}

dcl_status dcl_model_save(const dcl_model* model, const char* path) {
    return guarded([&] {
        require_arg(model != nullptr && path != nullptr, "model/path");
        dcl::save_checkpoint(model->value, path);
    });
}

dcl_status dcl_model_load(const char* path, dcl_model** out) {
    return guarded([&] {
        require_arg(path != nullptr && out != nullptr, "path/out");
        *out = nullptr;
        *out = new dcl_model{dcl::load_checkpoint(path)};
    });
}

size_t dcl_model_epochs(const dcl_model* model) { return model != nullptr ? model->value.epochs_completed() : 0; }

dcl_status dcl_model_epoch_report(const dcl_model* model, size_t index, dcl_epoch_report* out) {
    return guarded([&] {
        require_arg(model != nullptr && out != nullptr, "model/out");
        if (index >= model->value.history.size()) throw dcl::usage_error("epoch index out of range");
        *out = to_c(model->value.history[index]);
    });
}

dcl_status dcl_model_config(const dcl_model* model, dcl_config** out) {
    return guarded([&] {
        require_arg(model != nullptr && out != nullptr, "model/out");
        *out = new dcl_config{model->value.config};
    });
}

void dcl_model_free(dcl_model* model) { delete model; }

dcl_status dcl_evaluate(const dcl_model* model, const dcl_dataset* dataset, const dcl_embeddings* embeddings,
                        const dcl_lexicon* lexicon, dcl_metrics* out, size_t* evaluated) {
    return guarded([&] {
        require_arg(model != nullptr && dataset != nullptr && out != nullptr, "model/dataset/out");
        if (lexicon != nullptr) {
            const dcl::SubsetEvaluation sub =
                dcl::eval_subset(model->value, dataset->value, lexicon->value, store_of(embeddings));
            *out = to_c(sub.metrics);
            if (evaluated != nullptr) *evaluated = sub.subset_size;
        } else {
            *out = to_c(dcl::evaluate(model->value, dataset->value, store_of(embeddings)));
            if (evaluated != nullptr) *evaluated = dataset->value.size();
        }
    });
}

dcl_status dcl_crossval(const dcl_dataset* dataset, const dcl_config* config, const dcl_embeddings* embeddings,
                        size_t k, size_t jobs, dcl_metrics* folds, dcl_crossval_summary* summary) {
    return guarded([&] {
        require_arg(dataset != nullptr && config != nullptr, "dataset/config");
        const dcl::CrossValResult r = dcl::crossval(dataset->value, config->value, k, store_of(embeddings), jobs);
        if (folds != nullptr) {
            for (std::size_t i = 0; i < r.folds.size(); ++i) folds[i] = to_c(r.folds[i]);
        }
        if (summary != nullptr) {
            summary->accuracy = {r.accuracy.mean, r.accuracy.stddev};
            summary->macro_f1 = {r.macro_f1.mean, r.macro_f1.stddev};
            summary->weighted_f1 = {r.weighted_f1.mean, r.weighted_f1.stddev};
        }
    });
}

dcl_status dcl_export_embeddings(const dcl_model* model, const dcl_dataset* dataset, const dcl_embeddings* embeddings,
                                 const char* path) {
    return guarded([&] {
        require_arg(model != nullptr && dataset != nullptr && path != nullptr, "model/dataset/path");
        dcl::export_embeddings(model->value, dataset->value, path, store_of(embeddings));
    });
}

dcl_status dcl_gradcheck(uint64_t seed, dcl_gradcheck_fn on_case, void* user, size_t* cases, size_t* failed_cases) {
    std::size_t failed = 0;
    std::size_t total = 0;
    const dcl_status status = guarded([&] {
        const auto results = dcl::run_gradcheck_suite(seed, {}, [&](const dcl::GradcheckCase& c) {
            if (on_case != nullptr) {
                const dcl_gradcheck_case cc{c.name.c_str(), c.coordinates, c.failures, c.worst_error};
                on_case(&cc, user);
            }
        });
        total = results.size();
        for (const auto& c : results) failed += c.passed() ? 0 : 1;
        if (failed > 0) throw dcl::numerical_error(std::to_string(failed) + " gradient check case(s) failed");
    });
    if (cases != nullptr) *cases = total;
    if (failed_cases != nullptr) *failed_cases = failed;
    return status;
}

dcl_status dcl_loss_cl_se(const double* views, size_t n_pairs, size_t dim, double tau, double* loss, double* grads) {
    return guarded([&] {
        require_arg(views != nullptr && loss != nullptr, "views/loss");
        std::vector<dcl::AugmentedPair> pairs(n_pairs);
        for (std::size_t j = 0; j < n_pairs; ++j) {
            const double* a = views + 2 * j * dim;
            pairs[j].view_a.assign(a, a + dim);
            pairs[j].view_b.assign(a + dim, a + 2 * dim);
        }
        const dcl::ContrastiveResult r = dcl::cl_se(pairs, tau);
        *loss = r.loss;
        if (grads != nullptr) {
            for (std::size_t v = 0; v < r.grads.size(); ++v) std::copy(r.grads[v].begin(), r.grads[v].end(), grads + v * dim);
        }
    });
}

dcl_status dcl_loss_cl_su(const double* vectors, const int* labels, size_t n, size_t dim, double tau, double* loss,
                          double* grads) {
    return guarded([&] {
        require_arg(vectors != nullptr && labels != nullptr && loss != nullptr, "vectors/labels/loss");
        std::vector<dcl::Vector> vs(n);
        for (std::size_t i = 0; i < n; ++i) vs[i].assign(vectors + i * dim, vectors + (i + 1) * dim);
        const dcl::ContrastiveResult r = dcl::cl_su(vs, std::span<const int>(labels, n), tau);
        *loss = r.loss;
        if (grads != nullptr) {
            for (std::size_t i = 0; i < n; ++i) std::copy(r.grads[i].begin(), r.grads[i].end(), grads + i * dim);
        }
    });
}

dcl_status dcl_loss_focal(const double* probs, const int* labels, size_t n, double alpha, double gamma, double* loss,
                          double* grads) {
    return guarded([&] {
        require_arg(probs != nullptr && labels != nullptr && loss != nullptr, "probs/labels/loss");
        const dcl::FocalResult r =
            dcl::focal_loss(std::span<const double>(probs, n), std::span<const int>(labels, n), alpha, gamma);
        *loss = r.loss;
        if (grads != nullptr) std::copy(r.grads.begin(), r.grads.end(), grads);
    });
}

}  // extern "C"
