#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <set>

#include "dcl/data.hpp"
#include "dcl/error.hpp"

using namespace dcl;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path dir = fs::temp_directory_path() / "dcl_unit_data";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

Dataset synthetic(std::size_t positives, std::size_t negatives) {
    Dataset d;
    for (std::size_t i = 0; i < positives + negatives; ++i) {
        d.records.push_back({"r" + std::to_string(1000 + i), "text " + std::to_string(i), i < positives ? 1 : 0});
    }
    return d;
}

}  // namespace

TEST_CASE("csv loading") {
    const fs::path p = temp_file("three.csv",
                                 "id,text,label\n"
                                 "a,\"hello, world\",0\n"
                                 "b,\"she said \"\"no\"\"\",hate\n"
                                 "c,plain text,Non-Hate\r\n");
    const Dataset d = load_dataset(p);
    REQUIRE(d.size() == 3);
    CHECK(d.records[0].text == "hello, world");
    CHECK(d.records[1].text == "she said \"no\"");
    CHECK(d.records[1].label == 1);
    CHECK(d.records[2].label == 0);
    CHECK(d.labels() == std::vector<int>{0, 1, 0});
}

TEST_CASE("tsv and column order") {
    const Dataset d = load_dataset(temp_file("cols.tsv", "label\tid\ttext\n1\tx\tsome words\n"));
    REQUIRE(d.size() == 1);
    CHECK(d.records[0].id == "x");
    CHECK(d.records[0].label == 1);
}

TEST_CASE("jsonl loading") {
    const Dataset d = load_dataset(temp_file("ok.jsonl",
                                             "{\"id\": \"a\", \"text\": \"hi\", \"label\": 1}\n"
                                             "\n"
                                             "{\"id\": 7, \"text\": \"yo\", \"label\": \"non-hate\"}\n"));
    REQUIRE(d.size() == 2);
    CHECK(d.records[1].id == "7");
    CHECK(d.records[1].label == 0);

    const std::string msg = error_of([] {
        load_dataset(temp_file("missing.jsonl", "{\"id\": \"a\", \"text\": \"hi\", \"label\": 1}\n"
                                                "{\"id\": \"b\", \"label\": 0}\n"));
    });
    CHECK(msg.find(".jsonl:2:") != std::string::npos);
    CHECK(msg.find("text") != std::string::npos);
}

TEST_CASE("dataset errors") {
    const std::string dup = error_of([] { load_dataset(temp_file("dup.csv", "id,text,label\nq1,a,0\nq1,b,1\n")); });
    CHECK(dup.find("q1") != std::string::npos);

    const std::string bad_label =
        error_of([] { load_dataset(temp_file("lab.csv", "id,text,label\na,x,0\nb,y,maybe\n")); });
    CHECK(bad_label.find("lab.csv:3:") != std::string::npos);

    CHECK_FALSE(error_of([] { load_dataset(temp_file("nocol.csv", "id,label\na,0\n")); }).empty());
    CHECK_FALSE(error_of([] { load_dataset(temp_file("quote.csv", "id,text,label\na,\"open,0\n")); }).empty());
    CHECK_FALSE(error_of([] { load_dataset(fs::temp_directory_path() / "nope" / "x.csv"); }).empty());
    CHECK_FALSE(error_of([] { load_dataset(temp_file("bad.jsonl", "{not json}\n")); }).empty());
    CHECK_THROWS_AS(format_from_path("data.parquet"), Error);
}

TEST_CASE("label tokens") {
    CHECK(parse_label("1") == 1);
    CHECK(parse_label(" HATE ") == 1);
    CHECK(parse_label("0") == 0);
    CHECK(parse_label("non_hate") == 0);
    CHECK(parse_label("NonHate") == 0);
    CHECK_THROWS(parse_label("2"));
}

TEST_CASE("csv save and reload") {
    Dataset d;
    d.records = {{"a", "comma, and \"quote\"", 1}, {"b", "plain", 0}};
    const fs::path p = fs::temp_directory_path() / "dcl_unit_data" / "saved.csv";
    save_dataset_csv(d, p);
    const Dataset back = load_dataset(p);
    REQUIRE(back.size() == 2);
    CHECK(back.records[0].text == d.records[0].text);
    CHECK(back.records[0].label == 1);
}

TEST_CASE("lexicon") {
    const Lexicon lex = load_lexicon(temp_file("lex.txt", "# comment\nBitch\tinsult\n\n  moron  \n"));
    CHECK(lex.size() == 2);
    CHECK(lex.contains("bitch"));
    CHECK(lexicon_match({"1", "You are a BITCH!", 1}, lex));
    CHECK_FALSE(lexicon_match({"2", "bitching about work", 0}, lex));
    CHECK(lexicon_match({"3", "what a ...moron...", 0}, lex));
    CHECK(normalize_token("'Hello!!'") == "hello");
    CHECK(normalize_token("!!!") == "");
}

TEST_CASE("class statistics") {
    const ClassStats s = class_stats(synthetic(2, 8));
    CHECK(s.total == 10);
    CHECK(s.positive_share == Approx(0.2));
    CHECK(s.negatives_per_positive == Approx(4.0));
    CHECK_FALSE(s.has_lexicon);

    Lexicon all;
    all.add("text");
    const ClassStats m = class_stats(synthetic(3, 5), &all);
    CHECK(m.matched_positive_pct == 100.0);
    CHECK(m.matched_negative_pct == 100.0);
    CHECK(m.matched_total_pct == 100.0);

    CHECK(std::isinf(class_stats(synthetic(0, 4)).negatives_per_positive));
}

TEST_CASE("coverage fixture") {
    const Dataset d = load_dataset(fs::path(DCL_FIXTURES) / "coverage10.csv");
    const Lexicon lex = load_lexicon(fs::path(DCL_FIXTURES) / "insults.txt");
    const ClassStats s = class_stats(d, &lex);
    CHECK(s.matched_positives == 2);
    CHECK(s.matched_negatives == 2);
    CHECK(s.matched_total_pct == Approx(40.0));
    CHECK(s.matched_positive_pct == Approx(200.0 / 3.0));
}

TEST_CASE("stratified folds deal each class evenly") {
    const Dataset d = synthetic(5, 10);
    const FoldPlan plan = stratified_kfold(d, 5, 42);
    std::vector<int> pos(5, 0), neg(5, 0);
    for (const auto& r : d.records) (r.label == 1 ? pos : neg)[plan.fold_of(r.id)]++;
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(pos[f] == 1);
        CHECK(neg[f] == 2);
    }
}

TEST_CASE("stratified folds: leave-one-out, determinism, order independence") {
    const Dataset d = synthetic(3, 4);
    const FoldPlan loo = stratified_kfold(d, 7, 1);
    std::set<std::size_t> used;
    for (const auto& [id, f] : loo.assignment) used.insert(f);
    CHECK(used.size() == 7);

    CHECK(stratified_kfold(d, 3, 9).assignment == stratified_kfold(d, 3, 9).assignment);

    Dataset reversed = d;
    std::reverse(reversed.records.begin(), reversed.records.end());
    CHECK(stratified_kfold(reversed, 3, 9).assignment == stratified_kfold(d, 3, 9).assignment);

    CHECK_THROWS(stratified_kfold(d, 8, 1));
    CHECK_THROWS(stratified_kfold(d, 1, 1));
}

TEST_CASE("fold sizes differ by at most one") {
    const Dataset d = synthetic(7, 16);
    const FoldPlan plan = stratified_kfold(d, 5, 3);
    std::vector<int> sizes(5, 0);
    for (const auto& [id, f] : plan.assignment) sizes[f]++;
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 1);

    const auto [train, held] = split_fold(d, plan, 2);
    CHECK(train.size() + held.size() == d.size());
    for (const auto& r : held.records) CHECK(plan.fold_of(r.id) == 2);
}
