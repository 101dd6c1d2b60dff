// Published reference figures and frozen outputs that pin cross-platform
// behaviour.

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "dcl/data.hpp"
#include "dcl/encoder.hpp"
#include "dcl/losses.hpp"
#include "reference.hpp"

using namespace dcl;
using doctest::Approx;

TEST_CASE("imbalance ratio of a 1430 / 23353 corpus") {
    Dataset d;
    for (int i = 0; i < 1430 + 23353; ++i) d.records.push_back({std::to_string(i), "t", i < 1430 ? 1 : 0});
    const ClassStats s = class_stats(d);
    CHECK(s.total == 24783);
    CHECK(s.negatives_per_positive == Approx(16.3).epsilon(0.005));
}

TEST_CASE("lexicon coverage on a user-supplied corpus") {
    // Set DCL_COVERAGE_DATA and DCL_COVERAGE_LEXICON to the original hate
    // subset and insult list to check the published 2812 / 55.85% figures.
    const char* data = std::getenv("DCL_COVERAGE_DATA");
    const char* lexicon = std::getenv("DCL_COVERAGE_LEXICON");
    if (data == nullptr || lexicon == nullptr) {
        MESSAGE("corpus not supplied; skipping");
        return;
    }
    Dataset d = load_dataset(data);
    std::erase_if(d.records, [](const SentenceRecord& r) { return r.label != 1; });
    const ClassStats s = class_stats(d, nullptr);
    const Lexicon lex = load_lexicon(lexicon);
    const ClassStats m = class_stats(d, &lex);
    CHECK(s.positives == 2812);
    CHECK(m.matched_positive_pct == Approx(55.85).epsilon(5e-4));
}

TEST_CASE("hash featurizer output is pinned") {
    // Frozen on first derivation; drift here means features (and therefore
    // every trained model) would differ across builds.
    const Matrix m = hash_featurize("Hate", 16, 3);
    REQUIRE(m.rows() == 1);
    std::vector<int> pattern;
    for (double v : m.row(0)) pattern.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
    CHECK(pattern == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0, -1});
}

TEST_CASE("seeded loss values are pinned") {
    Rng rng(2024);
    const auto pairs = ref::random_pairs(4, 8, rng);
    const auto y = ref::random_labels(4, rng);
    CHECK(cl_se(pairs, 0.1).loss == Approx(5.362214616365045).epsilon(1e-13));
    CHECK(cl_su(ref::first_views(pairs), y, 0.05).loss == Approx(24.33631934648573).epsilon(1e-13));
}
