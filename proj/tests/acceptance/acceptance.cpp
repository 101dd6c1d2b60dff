// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dcl/error.hpp"
#include "dcl/evaluation.hpp"
#include "dcl/gradcheck.hpp"
#include "dcl/losses.hpp"
#include "dcl/trainer.hpp"
#include "reference.hpp"

using namespace dcl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failed_criteria = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-34s %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed_criteria;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t failed_cases = 0, coords = 0, bad_coords = 0;
    double worst = 0;
    std::string worst_case;
    for (const auto& c : run_gradcheck_suite(7)) {
        coords += c.coordinates;
        bad_coords += c.failures;
        if (!c.passed()) ++failed_cases;
        if (c.worst_error > worst) {
            worst = c.worst_error;
            worst_case = c.name;
        }
    }
    const double secs = seconds_since(t0);

    // Same analytic gradients against a step where rounding in the loss
    // value no longer dominates the difference quotient.
    GradcheckTolerance coarse;
    coarse.step = 1e-4;
    std::size_t coarse_bad = 0;
    double coarse_worst = 0;
    for (const auto& c : run_gradcheck_suite(7, coarse)) {
        coarse_bad += c.failures;
        coarse_worst = std::max(coarse_worst, c.worst_error);
    }

    Outcome o;
    o.pass = failed_cases == 0 && secs < 10.0;
    o.detail = std::to_string(bad_coords) + "/" + std::to_string(coords) + " coordinates outside 1e-5 at h=1e-6 in " +
               std::to_string(failed_cases) + "/72 cases, worst " + fmt("%.2e", worst) + " (" + worst_case +
               "); diagnostic h=1e-4: " + std::to_string(coarse_bad) + " outside, worst " + fmt("%.2e", coarse_worst);
    return o;
}

Outcome oracle_equivalence() {
    Rng rng(314);
    double worst = 0;
    for (int b = 0; b < 100; ++b) {
        const std::size_t n = 1 + rng.below(8);
        const std::size_t d = 2 + rng.below(15);
        const auto pairs = ref::random_pairs(n, d, rng);
        const auto y = ref::random_labels(n, rng);
        std::vector<double> p(n);
        for (double& x : p) x = rng.uniform(0.01, 0.99);
        worst = std::max(worst, std::abs(cl_se(pairs, 0.1).loss - ref::cl_se(pairs, 0.1)));
        worst = std::max(worst, std::abs(cl_su(ref::first_views(pairs), y, 0.05).loss -
                                         ref::cl_su(ref::first_views(pairs), y, 0.05)));
        worst = std::max(worst, std::abs(focal_loss(p, y, 0.3, 2.0).loss - ref::focal(p, y, 0.3, 2.0)));
    }
    return {worst <= 1e-9, "100 batches, max |stable - direct| = " + fmt("%.2e", worst)};
}

Outcome closed_forms() {
    Outcome o;
    const std::vector<AugmentedPair> one{{{0.3, -1.0, 2.0}, {1.0, 1.0, 0.5}, {}}};
    const double single = cl_se(one, 0.1).loss;
    const std::vector<AugmentedPair> two{{{1, 0}, {1, 0}, {}}, {{0, 1}, {0, 1}, {}}};
    const double e_se = std::abs(cl_se(two, 0.1).loss - 4.0 * std::log1p(2.0 * std::exp(-10.0)));
    const double e_su = std::abs(cl_su(std::vector<Vector>{{1, 0}, {1, 0}, {0, 1}}, std::vector<int>{0, 0, 1}, 0.05).loss -
                                 2.0 * std::log1p(std::exp(-20.0)));
    const double e_fl =
        std::abs(focal_loss(Vector{0.9}, std::vector<int>{1}, 0.3, 2.0).loss - 0.3 * 0.01 * -std::log(0.9));
    o.pass = single == 0.0 && e_se <= 1e-12 && e_su <= 1e-12 && e_fl <= 1e-12;
    o.detail = "N=1 cl_se " + fmt("%g", single) + ", errors cl_se " + fmt("%.1e", e_se) + " cl_su " +
               fmt("%.1e", e_su) + " focal " + fmt("%.1e", e_fl);
    return o;
}

Outcome reduction_identities() {
    Rng rng(2718);
    double worst_bce = 0;
    bool lambda_exact = true, ablation_exact = true;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng.below(10);
        std::vector<double> p(n);
        for (double& x : p) x = rng.uniform(0.001, 0.999);
        const auto y = ref::random_labels(n, rng);
        worst_bce = std::max(worst_bce, std::abs(focal_loss(p, y, 0.5, 0.0).loss - 0.5 * ref::bce(p, y)));

        const auto pairs = ref::random_pairs(n, 6, rng);
        const ClassifierHead head = ClassifierHead::initialize(6, t % 2 == 0, rng);
        LossSettings s;
        s.lambda = 0.0;
        const LossBreakdown b0 = total_loss(pairs, y, head, s, {}).breakdown;
        lambda_exact = lambda_exact && b0.total == b0.fl;
        s.lambda = rng.uniform(0.0, 1.0);
        const LossBreakdown b1 = total_loss(pairs, y, head, s, {false, false}).breakdown;
        ablation_exact = ablation_exact && b1.total == b1.fl && b1.cl == 0.0;
    }

    // The same through the trainer: staged + no_self disables both terms in
    // the first stage, staged_reversed + no_sup likewise.
    Rng data(5);
    std::vector<Vector> x;
    std::vector<int> y;
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) {
        Vector v(6);
        for (double& t : v) t = data.normal();
        x.push_back(v);
        y.push_back(i % 2);
        ids.push_back("r" + std::to_string(i));
    }
    FeatureSpec f{true, 6, {}};
    for (const auto& [sched, abl] : {std::pair{Schedule::staged, Ablation::no_self},
                                     std::pair{Schedule::staged_reversed, Ablation::no_sup}}) {
        TrainConfig c;
        c.batch_size = 8;
        c.epochs = 4;
        c.lambda = 0.8;
        c.dropout_rate = 0.1;
        c.schedule = sched;
        c.ablation = abl;
        for (const auto& r : train_on_vectors(x, y, ids, c, f).history) {
            if (r.epoch < 2) ablation_exact = ablation_exact && r.loss.total == r.loss.fl;
        }
    }
    Outcome o;
    o.pass = worst_bce <= 1e-12 && lambda_exact && ablation_exact;
    o.detail = "focal(g=0,a=.5) vs BCE/2 max " + fmt("%.1e", worst_bce) + "; lambda=0 total==fl " +
               (lambda_exact ? "exact" : "NOT exact") + "; both terms off total==fl " +
               (ablation_exact ? "exact" : "NOT exact");
    return o;
}

Outcome invariance_suite() {
    Rng rng(1618);
    double perm = 0, scale = 0, shift = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(7);
        const auto pairs = ref::random_pairs(n, 8, rng);
        const auto y = ref::random_labels(n, rng);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle(order, rng);
        std::vector<AugmentedPair> pp;
        std::vector<int> py;
        for (std::size_t i : order) {
            pp.push_back(pairs[i]);
            py.push_back(y[i]);
        }
        perm = std::max(perm, std::abs(cl_se(pairs, 0.1).loss - cl_se(pp, 0.1).loss));
        perm = std::max(perm, std::abs(cl_su(ref::first_views(pairs), y, 0.05).loss -
                                       cl_su(ref::first_views(pp), py, 0.05).loss));

        auto scaled = pairs;
        for (auto& p : scaled) {
            const double a = std::exp(rng.uniform(-4, 4));
            const double b = std::exp(rng.uniform(-4, 4));
            for (double& v : p.view_a) v *= a;
            for (double& v : p.view_b) v *= b;
        }
        scale = std::max(scale, std::abs(cl_se(pairs, 0.1).loss - cl_se(scaled, 0.1).loss));
        scale = std::max(scale, std::abs(cl_su(ref::first_views(pairs), y, 0.05).loss -
                                         cl_su(ref::first_views(scaled), y, 0.05).loss));

        Vector l(2 + rng.below(5));
        for (double& v : l) v = rng.uniform(-20, 20);
        Vector ls = l;
        const double c = rng.uniform(-300, 300);
        for (double& v : ls) v += c;
        const Vector a = softmax(l), b = softmax(ls);
        for (std::size_t i = 0; i < a.size(); ++i) shift = std::max(shift, std::abs(a[i] - b[i]));
    }

    bool dropout_bitwise = true;
    for (std::uint64_t seed : {1ULL, 42ULL, 0xdeadbeefULL}) {
        Rng r1(seed), r2(seed);
        const Vector v(128, 0.5);
        for (int i = 0; i < 20; ++i) dropout_bitwise = dropout_bitwise && apply_dropout(v, 0.5, r1) == apply_dropout(v, 0.5, r2);
    }

    Outcome o;
    o.pass = perm <= 1e-12 && scale <= 1e-9 && shift <= 1e-12 && dropout_bitwise;
    o.detail = "permutation " + fmt("%.1e", perm) + ", scale " + fmt("%.1e", scale) + ", softmax shift " +
               fmt("%.1e", shift) + ", dropout " + (dropout_bitwise ? "bitwise equal" : "DIFFERS");
    return o;
}

// Two Gaussian clusters, unit variance, centres 4 sigma apart on the first
// axis; 200 vectors of dimension 8, alternating labels.
struct VectorSet {
    std::vector<Vector> x;
    std::vector<int> y;
    std::vector<std::string> ids;
};

VectorSet two_clusters() {
    VectorSet s;
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        const int y = i % 2;
        Vector v(8);
        for (double& t : v) t = rng.normal();
        v[0] += y == 1 ? 2.0 : -2.0;
        s.x.push_back(v);
        s.y.push_back(y);
        s.ids.push_back("s" + std::to_string(i));
    }
    return s;
}

TrainConfig synthetic_config() {
    TrainConfig c;
    c.batch_size = 16;
    c.epochs = 200;
    c.seed = 42;
    return c;
}

std::string abort_note(const TrainingAborted& e) {
    return std::string("aborted after ") + std::to_string(e.history().size()) + " epochs: " + e.what();
}

Outcome end_to_end() {
    const VectorSet s = two_clusters();
    const auto t0 = std::chrono::steady_clock::now();
    TrainedModel m;
    try {
        m = train_on_vectors(s.x, s.y, s.ids, synthetic_config(), FeatureSpec{true, 8, {}});
    } catch (const TrainingAborted& e) {
        return {false, abort_note(e)};
    }
    const double secs = seconds_since(t0);
    // Trailing 10-epoch moving average of the epoch-mean total loss.
    std::vector<double> smooth;
    for (std::size_t i = 9; i < m.history.size(); ++i) {
        double sum = 0;
        for (std::size_t k = i - 9; k <= i; ++k) sum += m.history[k].loss.total;
        smooth.push_back(sum / 10.0);
    }
    std::size_t rises = 0;
    for (std::size_t i = 1; i < smooth.size(); ++i) rises += smooth[i] > smooth[i - 1];
    const double acc = m.history.back().train_metrics.accuracy;
    Outcome o;
    o.pass = acc >= 0.95 && rises == 0 && secs < 60.0;
    o.detail = "train accuracy " + fmt("%.4f", acc) + ", smoothed-loss increases " + std::to_string(rises) + "/" +
               std::to_string(smooth.size() == 0 ? 0 : smooth.size() - 1);
    return o;
}

Outcome imbalance() {
    // 20 hate / 300 non-hate, 16-d, centres 2 sigma apart.
    VectorSet s;
    Rng rng(2024);
    for (int i = 0; i < 320; ++i) {
        const int y = i % 16 == 0 ? 1 : 0;
        Vector v(16);
        for (double& t : v) t = rng.normal();
        v[0] += y == 1 ? 1.0 : -1.0;
        s.x.push_back(v);
        s.y.push_back(y);
        char id[16];
        std::snprintf(id, sizeof id, "s%03d", i);
        s.ids.push_back(id);
    }
    TrainConfig focal;
    focal.batch_size = 16;
    focal.epochs = 100;
    focal.seed = 42;
    TrainConfig ce = focal;
    ce.gamma = 0.0;
    ce.alpha = 0.5;
    const FeatureSpec f{true, 16, {}};
    const Metrics mf = train_on_vectors(s.x, s.y, s.ids, focal, f).history.back().train_metrics;
    const Metrics mc = train_on_vectors(s.x, s.y, s.ids, ce, f).history.back().train_metrics;

    // Recorded on first derivation.
    const ConfusionMatrix frozen_focal{15, 80, 5, 220};
    const ConfusionMatrix frozen_ce{15, 76, 5, 224};
    const bool reproduced = mf.counts == frozen_focal && mc.counts == frozen_ce;

    Outcome o;
    o.pass = mf.recall[1] >= mc.recall[1] && reproduced;
    o.detail = "hate recall focal " + fmt("%.4f", mf.recall[1]) + " vs cross-entropy " + fmt("%.4f", mc.recall[1]) +
               " (macro-F1 " + fmt("%.4f", mf.macro_f1) + " / " + fmt("%.4f", mc.macro_f1) + ")" +
               (reproduced ? ", recorded counts reproduced" : ", recorded counts NOT reproduced");
    return o;
}

Outcome metrics_oracle() {
    const Metrics m = metrics({50, 10, 10, 30});
    bool equal_supports = true;
    Rng rng(99);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.below(100);
        const std::size_t tp = rng.below(n + 1), tn = rng.below(n + 1);
        const Metrics e = metrics({tp, n - tn, n - tp, tn});
        equal_supports = equal_supports && e.macro_f1 == e.weighted_f1;
    }
    Outcome o;
    o.pass = std::abs(m.accuracy - 0.80) < 1e-5 && std::abs(m.macro_f1 - 0.79167) < 1e-5 &&
             std::abs(m.weighted_f1 - 0.80) < 1e-5 && equal_supports;
    o.detail = "accuracy " + fmt("%.5f", m.accuracy) + ", macro-F1 " + fmt("%.5f", m.macro_f1) + ", weighted-F1 " +
               fmt("%.5f", m.weighted_f1) + ", macro==weighted on equal supports " + (equal_supports ? "yes" : "NO");
    return o;
}

// Writes a dataset and a token-embedding file the way a user would supply
// them, then runs the full protocol from files.
std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ProtocolRun {
    std::vector<Metrics> folds;
    Metrics test;
    SubsetEvaluation subset;
    std::string checkpoint;
    std::string exported;
};

ProtocolRun run_protocol(const fs::path& dir, const fs::path& data_file, std::size_t jobs) {
    const Dataset data = load_dataset(data_file);
    const EmbeddingStore store = load_embeddings(dir / "tokens.emb");
    const Lexicon lex = load_lexicon(dir / "lexicon.txt");
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-3;
    cfg.seed = 7;
    cfg.report_metric = ReportMetric::weighted_f1;

    ProtocolRun r;
    r.folds = crossval(data, cfg, 5, &store, jobs).folds;
    TrainOptions opts;
    opts.store = &store;
    const TrainedModel model = train(data, cfg, opts);
    r.test = evaluate(model, data, &store);
    r.subset = eval_subset(model, data, lex, &store);
    const fs::path ckpt = dir / ("model_" + std::to_string(jobs) + ".ckpt");
    save_checkpoint(model, ckpt);
    r.checkpoint = read_bytes(ckpt);
    const fs::path exp = dir / ("export_" + std::to_string(jobs) + ".tsv");
    export_embeddings(model, data, exp, &store);
    r.exported = read_bytes(exp);
    return r;
}

Outcome bring_your_own_embeddings() {
    const fs::path dir = fs::temp_directory_path() / "dcl_acceptance_byoe";
    fs::remove_all(dir);
    fs::create_directories(dir);

    Rng rng(11);
    Dataset data;
    EmbeddingStore store(12);
    const char* words[] = {"scum", "lovely", "idiot", "weather", "vermin", "coffee"};
    for (int i = 0; i < 150; ++i) {
        const int y = i % 5 == 0 ? 1 : 0;
        const std::string id = "u" + std::to_string(1000 + i);
        const std::string text = std::string(words[rng.below(6)]) + " and " + words[rng.below(6)];
        data.records.push_back({id, text, y});
        const std::size_t tokens = 2 + rng.below(5);
        Matrix m(tokens, 12);
        for (double& v : m.values()) v = rng.normal() + (y == 1 ? 0.4 : -0.4);
        store.insert(id, m);
    }
    save_dataset_csv(data, dir / "data.csv");
    save_embeddings(store, dir / "tokens.emb");
    std::ofstream(dir / "lexicon.txt") << "scum\nidiot\nvermin\n";
    Dataset reversed = data;
    std::reverse(reversed.records.begin(), reversed.records.end());
    save_dataset_csv(reversed, dir / "reversed.csv");

    const ProtocolRun a = run_protocol(dir, dir / "data.csv", 1);
    const ProtocolRun b = run_protocol(dir, dir / "data.csv", 1);
    const ProtocolRun c = run_protocol(dir, dir / "data.csv", 4);
    const ProtocolRun d = run_protocol(dir, dir / "reversed.csv", 1);

    const bool repeat = a.folds == b.folds && a.test == b.test && a.subset.metrics == b.subset.metrics &&
                        a.checkpoint == b.checkpoint && a.exported == b.exported;
    const bool threads = a.folds == c.folds && a.checkpoint == c.checkpoint;
    const bool order = a.folds == d.folds;

    Outcome o;
    o.pass = repeat && threads && order;
    double wf1 = 0;
    for (const auto& m : a.folds) wf1 += m.weighted_f1 / 5.0;
    o.detail = std::string("5-fold weighted-F1 ") + fmt("%.4f", wf1) + ", lexicon subset n=" +
               std::to_string(a.subset.subset_size) + "; rerun " + (repeat ? "bitwise identical" : "DIFFERS") +
               ", 4 workers " + (threads ? "identical" : "DIFFERS") + ", reversed input folds " +
               (order ? "identical" : "DIFFER") + ". Published corpus-level scores are not targets.";
    return o;
}

Outcome schedule_coverage() {
    const VectorSet s = two_clusters();
    struct Variant {
        const char* name;
        Schedule schedule;
        Ablation ablation;
    };
    const Variant variants[] = {{"joint", Schedule::joint, Ablation::none},
                                {"staged", Schedule::staged, Ablation::none},
                                {"staged_reversed", Schedule::staged_reversed, Ablation::none},
                                {"no_self", Schedule::joint, Ablation::no_self},
                                {"no_sup", Schedule::joint, Ablation::no_sup}};
    std::vector<std::vector<LossBreakdown>> traces;
    std::string problems;
    for (const Variant& v : variants) {
        TrainConfig c = synthetic_config();
        c.schedule = v.schedule;
        c.ablation = v.ablation;
        try {
            std::vector<LossBreakdown> trace;
            for (const auto& r : train_on_vectors(s.x, s.y, s.ids, c, FeatureSpec{true, 8, {}}).history) {
                trace.push_back(r.loss);
            }
            traces.push_back(trace);
        } catch (const TrainingAborted& e) {
            problems += std::string(problems.empty() ? "" : "; ") + v.name + " " + abort_note(e);
        }
    }
    if (!problems.empty()) return {false, problems};
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t j = i + 1; j < traces.size(); ++j) {
            if (traces[i] == traces[j]) {
                return {false, std::string(variants[i].name) + " and " + variants[j].name + " histories identical"};
            }
        }
    }
    return {true, "5 configurations completed with pairwise distinct loss traces"};
}

}  // namespace

int main() {
    set_warning_sink([](const std::string&, void*) {}, nullptr);
    criterion("gradient correctness", gradient_correctness);
    criterion("oracle equivalence", oracle_equivalence);
    criterion("closed-form loss fixtures", closed_forms);
    criterion("reduction identities", reduction_identities);
    criterion("invariance suite", invariance_suite);
    criterion("end-to-end synthetic training", end_to_end);
    criterion("imbalance protocol", imbalance);
    criterion("metrics oracle", metrics_oracle);
    criterion("bring-your-own-embeddings pathway", bring_your_own_embeddings);
    criterion("schedule coverage", schedule_coverage);
    std::printf("%d criteria failed\n", failed_criteria);
    return failed_criteria == 0 ? 0 : 1;
}
