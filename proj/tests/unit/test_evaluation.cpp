#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dcl/error.hpp"
#include "dcl/evaluation.hpp"

using namespace dcl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "dcl_unit_evaluation";
    fs::create_directories(dir);
    return dir / name;
}

// Model over 2-d stored embeddings that predicts hate iff the second
// coordinate exceeds the first.
TrainedModel diagonal_model() {
    TrainedModel m;
    m.head.weights = Matrix(2, 2, Vector{1, 0, 0, 1});
    m.features.from_store = true;
    m.features.dim = 2;
    return m;
}

void add(Dataset& d, EmbeddingStore& s, const std::string& id, const std::string& text, int label, double a,
         double b) {
    d.records.push_back({id, text, label});
    s.insert(id, Matrix(1, 2, Vector{a, b}));
}

}  // namespace

TEST_CASE("evaluate with stored embeddings") {
    Dataset d;
    EmbeddingStore s(2);
    add(d, s, "a", "x", 1, 0.0, 1.0);
    add(d, s, "b", "x", 0, 1.0, 0.0);
    add(d, s, "c", "x", 1, 1.0, 0.2);  // missed
    add(d, s, "d", "x", 0, 0.1, 0.9);  // false alarm
    const TrainedModel m = diagonal_model();
    CHECK(predict_labels(m, d, &s) == std::vector<int>{1, 0, 0, 1});
    const Metrics r = evaluate(m, d, &s);
    CHECK(r.counts == ConfusionMatrix{1, 1, 1, 1});
    CHECK_THROWS(evaluate(m, d, nullptr));
}

TEST_CASE("lexicon subset evaluation") {
    Dataset d;
    EmbeddingStore s(2);
    add(d, s, "1", "you idiot", 1, 0.0, 1.0);     // tp
    add(d, s, "2", "calm words", 1, 1.0, 0.0);    // fn, not in subset
    add(d, s, "3", "idiot again", 0, 0.0, 1.0);   // fp
    add(d, s, "4", "nice day", 0, 1.0, 0.0);      // not in subset
    add(d, s, "5", "moron!", 1, 1.0, 0.0);        // fn
    add(d, s, "6", "just text", 0, 0.0, 1.0);     // not in subset
    Lexicon lex;
    lex.add("idiot");
    lex.add("moron");
    const TrainedModel m = diagonal_model();
    const SubsetEvaluation sub = eval_subset(m, d, lex, &s);
    CHECK(sub.subset_size == 3);
    CHECK(sub.metrics.counts == ConfusionMatrix{1, 1, 1, 0});

    Lexicon every;
    for (const char* t : {"you", "calm", "idiot", "nice", "moron", "just"}) every.add(t);
    CHECK(eval_subset(m, d, every, &s).metrics == evaluate(m, d, &s));

    Lexicon none;
    none.add("zzz");
    CHECK_THROWS_WITH(eval_subset(m, d, none, &s), doctest::Contains("no lexicon matches"));
}

TEST_CASE("crossval on a separable four-record fixture") {
    Dataset d;
    EmbeddingStore s(2);
    add(d, s, "p1", "x", 1, -1.0, 3.0);
    add(d, s, "p2", "x", 1, -1.2, 2.8);
    add(d, s, "n1", "x", 0, 3.0, -1.0);
    add(d, s, "n2", "x", 0, 2.8, -1.2);
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs = 40;
    cfg.learning_rate = 0.05;
    cfg.dropout_rate = 0.0;
    const CrossValResult r = crossval(d, cfg, 2, &s);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].accuracy == 1.0);
    CHECK(r.folds[1].accuracy == 1.0);
    CHECK(r.accuracy.mean == 1.0);
    CHECK(r.accuracy.stddev == 0.0);

    CHECK_THROWS(crossval(d, cfg, 5, &s));
}

TEST_CASE("crossval is deterministic, order independent and thread-count independent") {
    Dataset d;
    EmbeddingStore s(3);
    Rng rng(12);
    for (int i = 0; i < 30; ++i) {
        const int y = i % 3 == 0 ? 1 : 0;
        const std::string id = "q" + std::to_string(i);
        d.records.push_back({id, "t", y});
        s.insert(id, Matrix(1, 3, Vector{rng.normal() + (y ? 1.0 : -1.0), rng.normal(), rng.normal()}));
    }
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 3;
    cfg.learning_rate = 0.01;
    cfg.seed = 77;
    cfg.dropout_rate = 0.1;  // a 0.5 rate zeroes whole low-dimensional vectors too often
    const CrossValResult a = crossval(d, cfg, 3, &s);
    const CrossValResult b = crossval(d, cfg, 3, &s, 3);
    Dataset shuffled = d;
    Rng order(1);
    shuffle(shuffled.records, order);
    const CrossValResult c = crossval(shuffled, cfg, 3, &s);
    for (std::size_t f = 0; f < 3; ++f) {
        CHECK(a.folds[f] == b.folds[f]);
        CHECK(a.folds[f] == c.folds[f]);
    }
    CHECK(a.macro_f1.mean == b.macro_f1.mean);

    double mean = 0;
    for (const auto& m : a.folds) mean += m.accuracy / 3.0;
    double var = 0;
    for (const auto& m : a.folds) var += (m.accuracy - mean) * (m.accuracy - mean) / 3.0;
    CHECK(a.accuracy.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(a.accuracy.stddev == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("embedding export") {
    Dataset d;
    EmbeddingStore s(2);
    add(d, s, "e1", "x", 1, 0.1234567890123456789, -7.0);
    add(d, s, "e2", "x", 0, 1.0 / 3.0, 2.0);
    add(d, s, "e3", "x", 1, -5e-17, 1e20);
    const TrainedModel m = diagonal_model();
    const fs::path p = scratch("export.tsv");
    export_embeddings(m, d, p, &s);

    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "id\tlabel\tpred\tdim=2");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 3);

    const auto rows = read_exported_embeddings(p);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].vector == Vector{0.1234567890123456789, -7.0});
    CHECK(rows[2].vector == Vector{-5e-17, 1e20});
    CHECK(rows[1].predicted == 1);
    CHECK(rows[1].label == 0);
}

TEST_CASE("export works for an untrained hashed model") {
    Dataset d;
    d.records = {{"u1", "hello there", 0}, {"u2", "get lost", 1}};
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.hash_buckets = 8;
    const TrainedModel m = train(d, cfg);
    const fs::path p = scratch("untrained.tsv");
    export_embeddings(m, d, p);
    CHECK(read_exported_embeddings(p).size() == 2);
}

TEST_CASE("fold seeds differ per fold") {
    CHECK(fold_seed(1, 0) != fold_seed(1, 1));
    CHECK(fold_seed(1, 0) == fold_seed(1, 0));
    CHECK(fold_seed(1, 0) != fold_seed(2, 0));
}
