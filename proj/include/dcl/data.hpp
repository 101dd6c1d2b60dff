#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcl {

inline constexpr int kHate = 1;
inline constexpr int kNonHate = 0;

struct SentenceRecord {
    std::string id;
    std::string text;
    int label = kNonHate;
};

struct Dataset {
    std::string name;
    std::vector<SentenceRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    std::vector<int> labels() const;
};

enum class DataFormat { csv, tsv, jsonl };

// Picks the format from the file extension (.csv, .tsv, .jsonl/.json).
DataFormat format_from_path(const std::filesystem::path& path);

// Label tokens, case-insensitive after trimming:
//   "1", "hate"                      -> 1
//   "0", "non-hate", "nonhate", "non_hate" -> 0
// jsonl labels may also be the integers 0 / 1.
int parse_label(std::string_view token);

Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
Dataset load_dataset(const std::filesystem::path& path);

// Validates id uniqueness, nonempty text and binary labels.
void validate_dataset(const Dataset& dataset);

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);

// Insult-term list; terms are lowercase, trimmed, unique. The category tag
// is carried along but otherwise unused.
class Lexicon {
public:
    Lexicon() = default;

    void add(std::string_view term, std::string category = {});
    bool contains(std::string_view normalized_token) const;

    std::size_t size() const noexcept { return terms_.size(); }
    bool empty() const noexcept { return terms_.empty(); }
    const std::map<std::string, std::string, std::less<>>& terms() const noexcept { return terms_; }

private:
    std::map<std::string, std::string, std::less<>> terms_;
};

// One term per line, optional "TAB <category>"; '#' lines are comments.
Lexicon load_lexicon(const std::filesystem::path& path);

// Lowercase, then strip leading/trailing ASCII punctuation.
std::string normalize_token(std::string_view token);

// True iff some whitespace token of the text normalizes to a lexicon term.
bool lexicon_match(const SentenceRecord& record, const Lexicon& lexicon);

struct ClassStats {
    std::size_t total = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double positive_share = 0.0;
    // negatives per positive, i.e. the ratio reads 1 : negatives_per_positive.
    // Infinite when there are no positives.
    double negatives_per_positive = 0.0;

    bool has_lexicon = false;
    std::size_t matched_positives = 0;
    std::size_t matched_negatives = 0;
    // Percentages in [0, 100]; zero for an empty class.
    double matched_positive_pct = 0.0;
    double matched_negative_pct = 0.0;
    double matched_total_pct = 0.0;
};

ClassStats class_stats(const Dataset& dataset, const Lexicon* lexicon = nullptr);

struct FoldPlan {
    std::size_t k = 0;
    std::map<std::string, std::size_t> assignment;  // record id -> fold

    std::size_t fold_of(const std::string& id) const { return assignment.at(id); }
};

// Per class: members sorted by id, shuffled with the seed, then dealt
// round-robin. Dealing continues from where the previous class stopped so
// total fold sizes also differ by at most one. Independent of record order.
FoldPlan stratified_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed);

// Records of `dataset` in (training, held-out) for fold `fold`.
std::pair<Dataset, Dataset> split_fold(const Dataset& dataset, const FoldPlan& plan, std::size_t fold);

}  // namespace dcl
