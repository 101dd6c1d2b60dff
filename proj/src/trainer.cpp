#include "dcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace dcl {

namespace {

constexpr std::uint64_t kHeadStream = 0x4ead;
constexpr std::uint64_t kEpochStream = 0x10000;

std::string schedule_name(Schedule s) {
    switch (s) {
        case Schedule::joint: return "joint";
        case Schedule::staged: return "staged";
        case Schedule::staged_reversed: return "staged_reversed";
    }
    return "joint";
}

std::string ablation_name(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_self: return "no_self";
        case Ablation::no_sup: return "no_sup";
    }
    return "none";
}

double parse_real(const std::string& key, const std::string& value) {
    double out = 0.0;
    if (!parse_double(detail::trim(value), out) || !std::isfinite(out)) {
        throw usage_error("config key '" + key + "' expects a number, got '" + value + "'");
    }
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    if (!detail::parse_size(value, out)) {
        throw usage_error("config key '" + key + "' expects a nonnegative integer, got '" + value + "'");
    }
    return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
    const std::string v = detail::ascii_lower(detail::trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw usage_error("config key '" + key + "' expects true or false, got '" + value + "'");
}

void require(bool ok, const std::string& message) {
    if (!ok) throw usage_error("invalid config: " + message);
}

}  // namespace

void TrainConfig::validate() const {
    require(tau_se > 0.0, "tau_se must be positive");
    require(tau_su > 0.0, "tau_su must be positive");
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    require(gamma >= 0.0, "gamma must be nonnegative");
    require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(batch_size >= 2, "batch_size must be at least 2");
    require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
    require(epsilon > 0.0, "epsilon must be positive");
    require(weight_decay >= 0.0, "weight_decay must be nonnegative");
    require(hash_buckets >= 8, "hash_buckets must be at least 8");
    require(ngram_window >= 2, "ngram_window must be at least 2");
    if (schedule != Schedule::joint && stage_boundary && epochs > 0) {
        require(*stage_boundary < epochs, "stage_boundary must be smaller than epochs");
    }
}

std::size_t TrainConfig::effective_stage_boundary() const { return stage_boundary.value_or(epochs / 2); }

LossSettings TrainConfig::loss_settings() const {
    return {tau_se, tau_su, alpha, gamma, lambda, mean_reduction};
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    const std::string v(detail::trim(value));
    if (key == "tau_se") tau_se = parse_real(key, v);
    else if (key == "tau_su") tau_su = parse_real(key, v);
    else if (key == "alpha") alpha = parse_real(key, v);
    else if (key == "gamma") gamma = parse_real(key, v);
    else if (key == "lambda") lambda = parse_real(key, v);
    else if (key == "dropout_rate") dropout_rate = parse_real(key, v);
    else if (key == "learning_rate") learning_rate = parse_real(key, v);
    else if (key == "batch_size") batch_size = parse_count(key, v);
    else if (key == "epochs") epochs = parse_count(key, v);
    else if (key == "schedule") {
        if (v == "joint") schedule = Schedule::joint;
        else if (v == "staged") schedule = Schedule::staged;
        else if (v == "staged_reversed") schedule = Schedule::staged_reversed;
        else throw usage_error("schedule must be joint, staged or staged_reversed, got '" + v + "'");
    } else if (key == "stage_boundary") {
        if (v == "auto") stage_boundary.reset();
        else stage_boundary = parse_count(key, v);
    } else if (key == "ablation") {
        if (v == "none") ablation = Ablation::none;
        else if (v == "no_self") ablation = Ablation::no_self;
        else if (v == "no_sup") ablation = Ablation::no_sup;
        else throw usage_error("ablation must be none, no_self or no_sup, got '" + v + "'");
    } else if (key == "seed") {
        std::uint64_t s = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            throw usage_error("config key 'seed' expects an unsigned 64-bit integer, got '" + v + "'");
        }
        seed = s;
    } else if (key == "beta1") beta1 = parse_real(key, v);
    else if (key == "beta2") beta2 = parse_real(key, v);
    else if (key == "epsilon") epsilon = parse_real(key, v);
    else if (key == "weight_decay") weight_decay = parse_real(key, v);
    else if (key == "mean_reduction") mean_reduction = parse_flag(key, v);
    else if (key == "use_bias") use_bias = parse_flag(key, v);
    else if (key == "trainable_projection") trainable_projection = parse_flag(key, v);
    else if (key == "hash_buckets") hash_buckets = parse_count(key, v);
    else if (key == "ngram_window") ngram_window = parse_count(key, v);
    else if (key == "report_metric") {
        if (v == "macro_f1" || v == "macro") report_metric = ReportMetric::macro_f1;
        else if (v == "weighted_f1" || v == "weighted") report_metric = ReportMetric::weighted_f1;
        else throw usage_error("report_metric must be macro_f1 or weighted_f1, got '" + v + "'");
    } else {
        throw usage_error("unknown config key '" + key + "'");
    }
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
    const auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    return {
        {"tau_se", format_double(tau_se)},
        {"tau_su", format_double(tau_su)},
        {"alpha", format_double(alpha)},
        {"gamma", format_double(gamma)},
        {"lambda", format_double(lambda)},
        {"dropout_rate", format_double(dropout_rate)},
        {"learning_rate", format_double(learning_rate)},
        {"batch_size", std::to_string(batch_size)},
        {"epochs", std::to_string(epochs)},
        {"schedule", schedule_name(schedule)},
        {"stage_boundary", stage_boundary ? std::to_string(*stage_boundary) : "auto"},
        {"ablation", ablation_name(ablation)},
        {"seed", std::to_string(seed)},
        {"beta1", format_double(beta1)},
        {"beta2", format_double(beta2)},
        {"epsilon", format_double(epsilon)},
        {"weight_decay", format_double(weight_decay)},
        {"mean_reduction", flag(mean_reduction)},
        {"use_bias", flag(use_bias)},
        {"trainable_projection", flag(trainable_projection)},
        {"hash_buckets", std::to_string(hash_buckets)},
        {"ngram_window", std::to_string(ngram_window)},
        {"report_metric", report_metric == ReportMetric::macro_f1 ? "macro_f1" : "weighted_f1"},
    };
}

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
    TrainConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto eq = trimmed.find('=');
        const std::string where = origin + ":" + std::to_string(line_no);
        if (eq == std::string_view::npos) throw usage_error(where + ": expected 'key = value'");
        const std::string key(detail::trim(trimmed.substr(0, eq)));
        const std::string value(detail::trim(trimmed.substr(eq + 1)));
        try {
            config.set(key, value);
        } catch (const Error& e) {
            throw usage_error(where + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::string config_to_text(const TrainConfig& config) {
    std::string out;
    for (const auto& [k, v] : config.to_key_values()) out += k + " = " + v + "\n";
    return out;
}

TermFlags schedule_terms(const TrainConfig& config, std::size_t epoch) {
    TermFlags flags;
    if (config.schedule != Schedule::joint) {
        const bool first_stage = epoch < config.effective_stage_boundary();
        const bool self_first = config.schedule == Schedule::staged;
        flags.use_cl_se = first_stage == self_first;
        flags.use_cl_su = !flags.use_cl_se;
    }
    if (config.ablation == Ablation::no_self) flags.use_cl_se = false;
    if (config.ablation == Ablation::no_sup) flags.use_cl_su = false;
    return flags;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
    if (batch_size < 2) throw usage_error("batch_size must be at least 2 so every batch has negatives");
    if (count < 2) throw data_error("need at least 2 records to form a contrastive batch");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    shuffle(order, rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() < 2) {
        const std::vector<std::size_t> tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    return batches;
}

void adamw_step(std::span<const Parameter> params, OptimizerState& state, const AdamWOptions& options) {
    if (!(options.learning_rate > 0.0)) throw usage_error("learning rate must be positive");
    for (const Parameter& p : params) {
        if (p.values.size() != p.grad.size()) throw usage_error("gradient shape mismatch for parameter '" + p.name + "'");
        if (!all_finite(p.grad)) throw numerical_error("gradient blowup in parameter '" + p.name + "'");
    }
    if (state.moments.empty()) {
        for (const Parameter& p : params) {
            state.moments.push_back({p.name, Vector(p.values.size(), 0.0), Vector(p.values.size(), 0.0)});
        }
    }
    if (state.moments.size() != params.size()) throw usage_error("optimizer state does not match the parameter list");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    const double lr = options.learning_rate;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Parameter& p = params[k];
        MomentBuffers& mb = state.moments[k];
        if (mb.name != p.name || mb.first.size() != p.values.size()) {
            throw usage_error("optimizer state does not match parameter '" + p.name + "'");
        }
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double g = p.grad[i];
            mb.first[i] = options.beta1 * mb.first[i] + (1.0 - options.beta1) * g;
            mb.second[i] = options.beta2 * mb.second[i] + (1.0 - options.beta2) * g * g;
            const double m_hat = mb.first[i] / correction1;
            const double v_hat = mb.second[i] / correction2;
            const double old = p.values[i];
            p.values[i] = old - lr * m_hat / (std::sqrt(v_hat) + options.epsilon) - lr * options.weight_decay * old;
        }
    }
}

Vector TrainedModel::represent(std::span<const double> pooled) const {
    if (!projection) return Vector(pooled.begin(), pooled.end());
    const Matrix& p = *projection;
    if (pooled.size() != p.cols()) throw usage_error("sentence vector does not match the projection dimension");
    Vector out(p.rows(), 0.0);
    for (std::size_t r = 0; r < p.rows(); ++r) out[r] = dot(p.row(r), pooled);
    return out;
}

int TrainedModel::classify(std::span<const double> pooled) const {
    return predicted_class(head, represent(pooled));
}

std::vector<Vector> encode_dataset(const Dataset& dataset, const SentenceEncoder& encoder) {
    std::vector<Vector> out;
    out.reserve(dataset.size());
    for (const SentenceRecord& r : dataset.records) out.push_back(encoder.encode(r.id, r.text));
    return out;
}

SentenceEncoder make_encoder(const TrainConfig& config, const EmbeddingStore* store) {
    if (store != nullptr) return SentenceEncoder(*store);
    return SentenceEncoder(HashFeaturizerConfig{config.hash_buckets, config.ngram_window});
}

Metrics evaluate_vectors(const TrainedModel& model, std::span<const Vector> vectors, std::span<const int> labels) {
    std::vector<int> preds;
    preds.reserve(vectors.size());
    for (const Vector& v : vectors) preds.push_back(model.classify(v));
    return metrics(confusion(preds, labels));
}

namespace {

bool finite_breakdown(const LossBreakdown& b) {
    return std::isfinite(b.cl_se) && std::isfinite(b.cl_su) && std::isfinite(b.cl) && std::isfinite(b.fl) &&
           std::isfinite(b.total);
}

Matrix identity(std::size_t d) {
    Matrix m(d, d, 0.0);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

}  // namespace

TrainedModel train_on_vectors(std::span<const Vector> vectors, std::span<const int> labels,
                              std::span<const std::string> ids, const TrainConfig& config,
                              const FeatureSpec& features, const TrainOptions& options,
                              std::span<const Vector> validation_vectors, std::span<const int> validation_labels) {
    config.validate();
    const std::size_t n = vectors.size();
    if (labels.size() != n || ids.size() != n) throw usage_error("vectors, labels and ids differ in length");
    if (n < 2) throw data_error("need at least 2 training records");
    const std::size_t d = vectors.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != d) throw data_error("sentence '" + ids[i] + "' has a different dimension");
        if (norm(vectors[i]) <= kNormEpsilon) throw data_error("sentence '" + ids[i] + "' encodes to a zero vector");
    }

    const Rng root(config.seed);
    TrainedModel model;
    if (options.resume != nullptr) {
        model = *options.resume;
        if (model.head.input_dim() != d) throw usage_error("checkpoint dimension does not match the data");
        if (model.projection.has_value() != config.trainable_projection ||
            model.head.has_bias() != config.use_bias) {
            throw usage_error("checkpoint parameter layout does not match the config");
        }
        model.config = config;
    } else {
        Rng init = root.derive(kHeadStream);
        model.head = ClassifierHead::initialize(d, config.use_bias, init);
        if (config.trainable_projection) model.projection = identity(d);
        model.config = config;
    }
    model.features = features;

    const LossSettings settings = config.loss_settings();
    const AdamWOptions adam{config.learning_rate, config.beta1, config.beta2, config.epsilon, config.weight_decay};
    const double keep_scale = 1.0 / (1.0 - config.dropout_rate);

    std::vector<Vector> reps(n);
    std::vector<AugmentedPair> pairs;
    std::vector<DropoutMasks> masks;
    std::vector<int> batch_labels;
    Matrix d_projection;

    for (std::size_t epoch = model.epochs_completed(); epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        Rng rng = root.derive(kEpochStream + epoch);
        const TermFlags flags = schedule_terms(config, epoch);
        const auto batches = make_batches(n, config.batch_size, rng);

        LossBreakdown sum;
        for (const auto& batch : batches) {
            pairs.clear();
            batch_labels.clear();
            masks.assign(batch.size(), {});
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const std::size_t i = batch[b];
                reps[i] = model.represent(vectors[i]);
                try {
                    pairs.push_back(augment(reps[i], config.dropout_rate, rng, ids[i], &masks[b]));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::numerical) throw;
                    throw TrainingAborted(std::string(e.what()) + " for sentence '" + ids[i] + "' in epoch " +
                                              std::to_string(epoch),
                                          model.history);
                }
                batch_labels.push_back(labels[i]);
            }
            const TotalLoss loss = total_loss(pairs, batch_labels, model.head, settings, flags);
            if (!finite_breakdown(loss.breakdown)) {
                throw TrainingAborted("non-finite loss in epoch " + std::to_string(epoch), model.history);
            }
            sum.cl_se += loss.breakdown.cl_se;
            sum.cl_su += loss.breakdown.cl_su;
            sum.cl += loss.breakdown.cl;
            sum.fl += loss.breakdown.fl;
            sum.total += loss.breakdown.total;

            std::vector<Parameter> params;
            params.push_back({"head.weights", model.head.weights.values(), loss.grads.d_weights.values()});
            if (model.head.has_bias()) params.push_back({"head.bias", model.head.bias, loss.grads.d_bias});
            if (model.projection) {
                // h = P x, view = mask * h / (1 - rate)  =>  dP += (sum over views) dh x^T
                d_projection = Matrix(d, d, 0.0);
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const Vector& x = vectors[batch[b]];
                    const Vector& ga = loss.grads.d_vectors[2 * b];
                    const Vector& gb = loss.grads.d_vectors[2 * b + 1];
                    for (std::size_t r = 0; r < d; ++r) {
                        const double dh = keep_scale * (masks[b].a[r] * ga[r] + masks[b].b[r] * gb[r]);
                        if (dh == 0.0) continue;
                        auto row = d_projection.row(r);
                        for (std::size_t c = 0; c < d; ++c) row[c] += dh * x[c];
                    }
                }
                params.push_back({"projection", model.projection->values(), d_projection.values()});
            }
            try {
                adamw_step(params, model.optimizer, adam);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::numerical) throw;
                throw TrainingAborted(std::string(e.what()) + " in epoch " + std::to_string(epoch), model.history);
            }
        }

        const double count = static_cast<double>(batches.size());
        EpochReport report;
        report.epoch = epoch;
        report.loss = {sum.cl_se / count, sum.cl_su / count, sum.cl / count, sum.fl / count, sum.total / count};
        report.train_metrics = evaluate_vectors(model, vectors, labels);
        if (!validation_vectors.empty()) {
            report.validation = evaluate_vectors(model, validation_vectors, validation_labels);
        }
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        model.history.push_back(report);
        if (options.on_epoch) options.on_epoch(report);
    }
    return model;
}

TrainedModel train(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    validate_dataset(dataset);
    const SentenceEncoder encoder = make_encoder(config, options.store);
    const std::vector<Vector> vectors = encode_dataset(dataset, encoder);
    std::vector<std::string> ids;
    ids.reserve(dataset.size());
    for (const SentenceRecord& r : dataset.records) ids.push_back(r.id);

    FeatureSpec features;
    features.from_store = encoder.uses_store();
    features.dim = encoder.dim();
    features.hash = encoder.hash_config();

    std::vector<Vector> val_vectors;
    std::vector<int> val_labels;
    if (options.validation != nullptr && !options.validation->empty()) {
        val_vectors = encode_dataset(*options.validation, encoder);
        val_labels = options.validation->labels();
    }
    return train_on_vectors(vectors, dataset.labels(), ids, config, features, options, val_vectors, val_labels);
}

}  // namespace dcl
