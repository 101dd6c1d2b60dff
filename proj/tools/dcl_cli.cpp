// Command-line front end. Talks to the toolkit exclusively through dcl/dcl.h.
//
//   dcl train --data train.csv --out model.ckpt [--config cfg.txt] [--set key=value ...]
//   dcl eval --model model.ckpt --data test.csv [--lexicon insults.txt]
//   dcl crossval --data dv.csv [--config cfg.txt] [--folds 5]
//   dcl stats --data se.csv [--lexicon insults.txt]
//   dcl gradcheck [--seed 7]
//   dcl export-embeddings --model model.ckpt --data test.csv --out emb.tsv
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcl/dcl.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Failure {
    int code;
};

void check(dcl_status status) {
    if (status == DCL_OK) return;
    std::cerr << "error: " << dcl_last_error() << '\n';
    switch (status) {
        case DCL_ERR_USAGE: throw Failure{kExitUsage};
        case DCL_ERR_DATA: throw Failure{kExitData};
        default: throw Failure{kExitNumerical};
    }
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<dcl_dataset, Deleter<dcl_dataset, dcl_dataset_free>>;
using LexiconPtr = std::unique_ptr<dcl_lexicon, Deleter<dcl_lexicon, dcl_lexicon_free>>;
using EmbeddingsPtr = std::unique_ptr<dcl_embeddings, Deleter<dcl_embeddings, dcl_embeddings_free>>;
using ConfigPtr = std::unique_ptr<dcl_config, Deleter<dcl_config, dcl_config_free>>;
using ModelPtr = std::unique_ptr<dcl_model, Deleter<dcl_model, dcl_model_free>>;

DatasetPtr load_dataset(const std::string& path, const std::string& format) {
    dcl_dataset* raw = nullptr;
    check(dcl_dataset_load(path.c_str(), format.empty() ? nullptr : format.c_str(), &raw));
    return DatasetPtr(raw);
}

LexiconPtr load_lexicon(const std::string& path) {
    if (path.empty()) return nullptr;
    dcl_lexicon* raw = nullptr;
    check(dcl_lexicon_load(path.c_str(), &raw));
    return LexiconPtr(raw);
}

EmbeddingsPtr load_embeddings(const std::string& path) {
    if (path.empty()) return nullptr;
    dcl_embeddings* raw = nullptr;
    check(dcl_embeddings_load(path.c_str(), &raw));
    return EmbeddingsPtr(raw);
}

ModelPtr load_model(const std::string& path) {
    dcl_model* raw = nullptr;
    check(dcl_model_load(path.c_str(), &raw));
    return ModelPtr(raw);
}

ConfigPtr build_config(const std::string& path, const std::vector<std::string>& overrides) {
    dcl_config* raw = nullptr;
    check(path.empty() ? dcl_config_new(&raw) : dcl_config_load(path.c_str(), &raw));
    ConfigPtr config(raw);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
            throw Failure{kExitUsage};
        }
        check(dcl_config_set(config.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    check(dcl_config_validate(config.get()));
    return config;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string epoch_line(const dcl_epoch_report& r) {
    return "epoch=" + std::to_string(r.epoch) + " cl_se=" + fmt("%.17g", r.loss.cl_se) +
           " cl_su=" + fmt("%.17g", r.loss.cl_su) + " fl=" + fmt("%.17g", r.loss.fl) +
           " total=" + fmt("%.17g", r.loss.total);
}

void print_metrics(const dcl_metrics& m, const std::string& prefix = "") {
    std::cout << prefix << "accuracy=" << fmt("%.6f", m.accuracy) << '\n'
              << prefix << "macro_f1=" << fmt("%.6f", m.macro_f1) << '\n'
              << prefix << "weighted_f1=" << fmt("%.6f", m.weighted_f1) << '\n';
    const char* names[2] = {"non_hate", "hate"};
    for (int c = 1; c >= 0; --c) {
        std::cout << prefix << names[c] << "_precision=" << fmt("%.6f", m.precision[c]) << ' ' << names[c]
                  << "_recall=" << fmt("%.6f", m.recall[c]) << ' ' << names[c] << "_f1=" << fmt("%.6f", m.f1[c])
                  << ' ' << names[c] << "_support=" << m.support[c] << '\n';
    }
    std::cout << prefix << "tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " tn=" << m.tn << '\n';
}

struct TrainArgs {
    std::string data, format, config, out, embeddings, validation, report, resume;
    std::vector<std::string> overrides;
};

struct ReportSink {
    std::ofstream file;
};

void on_epoch(const dcl_epoch_report* r, void* user) {
    const std::string line = epoch_line(*r);
    std::cout << line << '\n' << std::flush;
    auto* sink = static_cast<ReportSink*>(user);
    if (sink->file.is_open()) sink->file << line << '\n' << std::flush;
}

int run_train(const TrainArgs& a) {
    const DatasetPtr data = load_dataset(a.data, a.format);
    const ConfigPtr config = build_config(a.config, a.overrides);
    const EmbeddingsPtr embeddings = load_embeddings(a.embeddings);
    const DatasetPtr validation = a.validation.empty() ? nullptr : load_dataset(a.validation, a.format);
    const ModelPtr resume = a.resume.empty() ? nullptr : load_model(a.resume);

    ReportSink sink;
    if (!a.report.empty()) {
        sink.file.open(a.report);
        if (!sink.file) {
            std::cerr << "error: cannot write report " << a.report << '\n';
            return kExitData;
        }
    }
    dcl_train_options options{validation.get(), embeddings.get(), resume.get(), on_epoch, &sink};
    dcl_model* raw = nullptr;
    check(dcl_train(data.get(), config.get(), &options, &raw));
    const ModelPtr model(raw);
    check(dcl_model_save(model.get(), a.out.c_str()));

    const std::size_t epochs = dcl_model_epochs(model.get());
    if (epochs > 0) {
        dcl_epoch_report last{};
        check(dcl_model_epoch_report(model.get(), epochs - 1, &last));
        std::cout << "train_accuracy=" << fmt("%.6f", last.train.accuracy) << '\n';
        if (last.has_validation) print_metrics(last.validation, "validation_");
    }
    std::cout << "checkpoint=" << a.out << '\n';
    return 0;
}

struct EvalArgs {
    std::string model, data, format, embeddings, lexicon;
};

int run_eval(const EvalArgs& a) {
    const ModelPtr model = load_model(a.model);
    const DatasetPtr data = load_dataset(a.data, a.format);
    const EmbeddingsPtr embeddings = load_embeddings(a.embeddings);
    const LexiconPtr lexicon = load_lexicon(a.lexicon);
    dcl_metrics m{};
    std::size_t evaluated = 0;
    check(dcl_evaluate(model.get(), data.get(), embeddings.get(), lexicon.get(), &m, &evaluated));
    std::cout << "samples=" << evaluated << '\n';
    if (lexicon) std::cout << "subset=lexicon\n";
    print_metrics(m);
    return 0;
}

struct CrossvalArgs {
    std::string data, format, config, embeddings;
    std::vector<std::string> overrides;
    std::size_t folds = 5;
    std::size_t jobs = 1;
};

int run_crossval(const CrossvalArgs& a) {
    const DatasetPtr data = load_dataset(a.data, a.format);
    const ConfigPtr config = build_config(a.config, a.overrides);
    const EmbeddingsPtr embeddings = load_embeddings(a.embeddings);
    std::vector<dcl_metrics> folds(a.folds);
    dcl_crossval_summary summary{};
    check(dcl_crossval(data.get(), config.get(), embeddings.get(), a.folds, a.jobs, folds.data(), &summary));
    for (std::size_t i = 0; i < folds.size(); ++i) {
        std::cout << "fold=" << i << " accuracy=" << fmt("%.6f", folds[i].accuracy)
                  << " macro_f1=" << fmt("%.6f", folds[i].macro_f1)
                  << " weighted_f1=" << fmt("%.6f", folds[i].weighted_f1) << '\n';
    }
    const auto line = [](const char* name, const dcl_summary& s) {
        std::cout << name << "_mean=" << fmt("%.6f", s.mean) << ' ' << name << "_std=" << fmt("%.6f", s.stddev) << '\n';
    };
    line("accuracy", summary.accuracy);
    line("macro_f1", summary.macro_f1);
    line("weighted_f1", summary.weighted_f1);
    return 0;
}

int run_stats(const std::string& data_path, const std::string& format, const std::string& lexicon_path) {
    const DatasetPtr data = load_dataset(data_path, format);
    const LexiconPtr lexicon = load_lexicon(lexicon_path);
    dcl_class_stats s{};
    check(dcl_class_stats_compute(data.get(), lexicon.get(), &s));
    std::cout << "records=" << s.total << '\n'
              << "hate=" << s.positives << '\n'
              << "non_hate=" << s.negatives << '\n'
              << "positive_share=" << fmt("%.4f", s.positive_share) << '\n'
              << "imbalance=1:" << fmt("%.2f", s.negatives_per_positive) << '\n';
    if (s.has_lexicon) {
        std::cout << "hate_with_lexicon=" << s.matched_positives << ' '
                  << "hate_proportion=" << fmt("%.2f", s.matched_positive_pct) << "%\n"
                  << "non_hate_with_lexicon=" << s.matched_negatives << ' '
                  << "non_hate_proportion=" << fmt("%.2f", s.matched_negative_pct) << "%\n"
                  << "with_lexicon=" << (s.matched_positives + s.matched_negatives) << ' '
                  << "proportion=" << fmt("%.2f", s.matched_total_pct) << "%\n";
    }
    return 0;
}

void on_gradcheck_case(const dcl_gradcheck_case* c, void*) {
    std::cout << (c->failures == 0 ? "PASS " : "FAIL ") << c->name << " coords=" << c->coordinates
              << " failures=" << c->failures << " worst=" << fmt("%.3e", c->worst_error) << '\n';
}

int run_gradcheck(std::uint64_t seed) {
    std::size_t cases = 0;
    std::size_t failed = 0;
    const dcl_status status = dcl_gradcheck(seed, on_gradcheck_case, nullptr, &cases, &failed);
    std::cout << "cases=" << cases << " failed=" << failed << '\n';
    check(status);
    return 0;
}

struct ExportArgs {
    std::string model, data, format, out, embeddings;
};

int run_export(const ExportArgs& a) {
    const ModelPtr model = load_model(a.model);
    const DatasetPtr data = load_dataset(a.data, a.format);
    const EmbeddingsPtr embeddings = load_embeddings(a.embeddings);
    check(dcl_export_embeddings(model.get(), data.get(), embeddings.get(), a.out.c_str()));
    std::cout << "exported=" << dcl_dataset_size(data.get()) << " path=" << a.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual contrastive learning toolkit for hate speech detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dcl_version()));

    const auto format_option = [](CLI::App* cmd, std::string& target) {
        cmd->add_option("--format", target, "Dataset format (csv, tsv, jsonl); default from extension")
            ->check(CLI::IsMember({"csv", "tsv", "jsonl"}));
    };

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Fit a classifier head and write a checkpoint");
    train_cmd->add_option("--data", train.data, "Training dataset")->required();
    train_cmd->add_option("--out", train.out, "Checkpoint path to write")->required();
    train_cmd->add_option("--config", train.config, "key = value config file");
    train_cmd->add_option("--set", train.overrides, "Config override key=value (repeatable)");
    train_cmd->add_option("--embeddings", train.embeddings, "Precomputed token embeddings");
    train_cmd->add_option("--validation", train.validation, "Validation dataset");
    train_cmd->add_option("--report", train.report, "Also write per-epoch report lines here");
    train_cmd->add_option("--resume", train.resume, "Continue from this checkpoint");
    format_option(train_cmd, train.format);

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset");
    eval_cmd->add_option("--model", eval.model, "Checkpoint")->required();
    eval_cmd->add_option("--data", eval.data, "Dataset")->required();
    eval_cmd->add_option("--embeddings", eval.embeddings, "Precomputed token embeddings");
    eval_cmd->add_option("--lexicon", eval.lexicon, "Restrict to records containing a lexicon term");
    format_option(eval_cmd, eval.format);

    CrossvalArgs cv;
    auto* cv_cmd = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
    cv_cmd->add_option("--data", cv.data, "Dataset")->required();
    cv_cmd->add_option("--config", cv.config, "key = value config file");
    cv_cmd->add_option("--set", cv.overrides, "Config override key=value (repeatable)");
    cv_cmd->add_option("--folds", cv.folds, "Number of folds")->capture_default_str();
    cv_cmd->add_option("--jobs", cv.jobs, "Folds trained concurrently")->capture_default_str();
    cv_cmd->add_option("--embeddings", cv.embeddings, "Precomputed token embeddings");
    format_option(cv_cmd, cv.format);

    std::string stats_data, stats_format, stats_lexicon;
    auto* stats_cmd = app.add_subcommand("stats", "Class balance and lexicon coverage");
    stats_cmd->add_option("--data", stats_data, "Dataset")->required();
    stats_cmd->add_option("--lexicon", stats_lexicon, "Insult lexicon");
    format_option(stats_cmd, stats_format);

    std::uint64_t grad_seed = 7;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
    grad_cmd->add_option("--seed", grad_seed, "Seed for the random batches")->capture_default_str();

    ExportArgs ex;
    auto* export_cmd = app.add_subcommand("export-embeddings", "Write sentence vectors for external plotting");
    export_cmd->add_option("--model", ex.model, "Checkpoint")->required();
    export_cmd->add_option("--data", ex.data, "Dataset")->required();
    export_cmd->add_option("--out", ex.out, "Output path")->required();
    export_cmd->add_option("--embeddings", ex.embeddings, "Precomputed token embeddings");
    format_option(export_cmd, ex.format);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*train_cmd) return run_train(train);
        if (*eval_cmd) return run_eval(eval);
        if (*cv_cmd) return run_crossval(cv);
        if (*stats_cmd) return run_stats(stats_data, stats_format, stats_lexicon);
        if (*grad_cmd) return run_gradcheck(grad_seed);
        if (*export_cmd) return run_export(ex);
    } catch (const Failure& f) {
        return f.code;
    }
    std::cerr << app.help();
    return kExitUsage;
}
