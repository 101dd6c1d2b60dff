#include "dcl/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "dcl/error.hpp"
#include "dcl/numkit.hpp"
#include "text_util.hpp"

namespace dcl {

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const SentenceRecord& r : records) out.push_back(r.label);
    return out;
}

DataFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = detail::ascii_lower(path.extension().string());
    if (ext == ".csv") return DataFormat::csv;
    if (ext == ".tsv") return DataFormat::tsv;
    if (ext == ".jsonl" || ext == ".json") return DataFormat::jsonl;
    throw usage_error("cannot infer dataset format from '" + path.string() + "'; use csv, tsv or jsonl");
}

int parse_label(std::string_view token) {
    const std::string t = detail::ascii_lower(detail::trim(token));
    if (t == "1" || t == "hate") return kHate;
    if (t == "0" || t == "non-hate" || t == "nonhate" || t == "non_hate") return kNonHate;
    throw data_error("unknown label '" + std::string(token) + "'");
}

namespace {

// RFC 4180 style: quoted fields may contain separators, doubled quotes and
// newlines. Returns false at end of input.
bool read_delimited_row(std::istream& in, char sep, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == sep) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line_no;
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
    }
    if (!any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(std::move(field));
    ++line_no;
    return true;
}

bool blank_row(const std::vector<std::string>& fields) {
    return fields.size() == 1 && detail::trim(fields[0]).empty();
}

Dataset load_delimited(const std::filesystem::path& path, char sep) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open dataset " + path.string());
    Dataset ds;
    ds.name = path.stem().string();

    std::vector<std::string> fields;
    std::size_t line_no = 0;
    if (!read_delimited_row(in, sep, fields, line_no)) return ds;
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        column[detail::ascii_lower(detail::trim(fields[i]))] = i;
    }
    for (const char* required : {"id", "text", "label"}) {
        if (!column.contains(required)) {
            throw data_error(path.string() + ":1: missing required column '" + required + "'");
        }
    }
    const std::size_t id_col = column["id"], text_col = column["text"], label_col = column["label"];
    const std::size_t needed = std::max({id_col, text_col, label_col}) + 1;

    std::size_t row_start = line_no + 1;
    while (read_delimited_row(in, sep, fields, line_no)) {
        const std::string where = path.string() + ":" + std::to_string(row_start);
        row_start = line_no + 1;
        if (blank_row(fields)) continue;
        if (fields.size() < needed) throw data_error(where + ": missing field (" + std::to_string(fields.size()) +
                                                     " of " + std::to_string(needed) + " columns)");
        SentenceRecord rec;
        rec.id = std::string(detail::trim(fields[id_col]));
        rec.text = fields[text_col];
        try {
            rec.label = parse_label(fields[label_col]);
        } catch (const Error& e) {
            throw data_error(where + ": " + e.what());
        }
        if (rec.id.empty()) throw data_error(where + ": empty id");
        if (detail::trim(rec.text).empty()) throw data_error(where + ": empty text for id '" + rec.id + "'");
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open dataset " + path.string());
    Dataset ds;
    ds.name = path.stem().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        const auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw data_error(where + ": not a JSON object");
        for (const char* key : {"id", "text", "label"}) {
            if (!obj.contains(key)) throw data_error(where + ": missing field '" + key + "'");
        }
        SentenceRecord rec;
        const auto& id = obj["id"];
        if (id.is_string()) {
            rec.id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            rec.id = std::to_string(id.get<long long>());
        } else {
            throw data_error(where + ": field 'id' must be a string or integer");
        }
        if (!obj["text"].is_string()) throw data_error(where + ": field 'text' must be a string");
        rec.text = obj["text"].get<std::string>();
        const auto& label = obj["label"];
        try {
            if (label.is_number_integer()) {
                rec.label = parse_label(std::to_string(label.get<long long>()));
            } else if (label.is_string()) {
                rec.label = parse_label(label.get<std::string>());
            } else {
                throw data_error("label must be a string or integer");
            }
        } catch (const Error& e) {
            throw data_error(where + ": " + e.what());
        }
        if (rec.id.empty()) throw data_error(where + ": empty id");
        if (detail::trim(rec.text).empty()) throw data_error(where + ": empty text for id '" + rec.id + "'");
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

void validate_dataset(const Dataset& dataset) {
    std::set<std::string_view> seen;
    for (const SentenceRecord& r : dataset.records) {
        if (!seen.insert(r.id).second) throw data_error("duplicate id '" + r.id + "' in dataset " + dataset.name);
        if (detail::trim(r.text).empty()) throw data_error("empty text for id '" + r.id + "'");
        if (r.label != kHate && r.label != kNonHate) throw data_error("non-binary label for id '" + r.id + "'");
    }
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
    Dataset ds = format == DataFormat::jsonl ? load_jsonl(path)
                                              : load_delimited(path, format == DataFormat::csv ? ',' : '\t');
    validate_dataset(ds);
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_from_path(path)); }

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write dataset " + path.string());
    const auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q.push_back('"');
            q.push_back(c);
        }
        return q + "\"";
    };
    out << "id,text,label\n";
    for (const SentenceRecord& r : dataset.records) out << quote(r.id) << ',' << quote(r.text) << ',' << r.label << '\n';
}

void Lexicon::add(std::string_view term, std::string category) {
    std::string t = detail::ascii_lower(detail::trim(term));
    if (t.empty()) throw data_error("empty lexicon term");
    terms_.insert_or_assign(std::move(t), std::move(category));
}

bool Lexicon::contains(std::string_view normalized_token) const { return terms_.find(normalized_token) != terms_.end(); }

Lexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open lexicon " + path.string());
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        const std::string_view trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto parts = detail::split(trimmed, '\t');
        lex.add(parts[0], parts.size() > 1 ? std::string(detail::trim(parts[1])) : std::string());
    }
    if (lex.empty()) warn("lexicon " + path.string() + " has no terms");
    return lex;
}

std::string normalize_token(std::string_view token) {
    const auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    while (!token.empty() && punct(token.front())) token.remove_prefix(1);
    while (!token.empty() && punct(token.back())) token.remove_suffix(1);
    return detail::ascii_lower(token);
}

bool lexicon_match(const SentenceRecord& record, const Lexicon& lexicon) {
    for (const std::string& tok : detail::split_whitespace(record.text)) {
        const std::string norm_tok = normalize_token(tok);
        if (!norm_tok.empty() && lexicon.contains(norm_tok)) return true;
    }
    return false;
}

ClassStats class_stats(const Dataset& dataset, const Lexicon* lexicon) {
    ClassStats s;
    s.total = dataset.size();
    s.has_lexicon = lexicon != nullptr;
    for (const SentenceRecord& r : dataset.records) {
        const bool pos = r.label == kHate;
        (pos ? s.positives : s.negatives) += 1;
        if (lexicon != nullptr && lexicon_match(r, *lexicon)) (pos ? s.matched_positives : s.matched_negatives) += 1;
    }
    const auto pct = [](std::size_t part, std::size_t whole) {
        return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
    };
    s.positive_share = s.total == 0 ? 0.0 : static_cast<double>(s.positives) / static_cast<double>(s.total);
    s.negatives_per_positive = s.positives == 0 ? std::numeric_limits<double>::infinity()
                                                : static_cast<double>(s.negatives) / static_cast<double>(s.positives);
    s.matched_positive_pct = pct(s.matched_positives, s.positives);
    s.matched_negative_pct = pct(s.matched_negatives, s.negatives);
    s.matched_total_pct = pct(s.matched_positives + s.matched_negatives, s.total);
    return s;
}

FoldPlan stratified_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw usage_error("k-fold needs k >= 2");
    if (k > dataset.size()) {
        throw usage_error("k = " + std::to_string(k) + " exceeds the dataset size " + std::to_string(dataset.size()));
    }
    FoldPlan plan;
    plan.k = k;
    Rng rng(seed);
    std::size_t next_fold = 0;
    for (int cls : {kNonHate, kHate}) {
        std::vector<std::string> members;
        for (const SentenceRecord& r : dataset.records) {
            if (r.label == cls) members.push_back(r.id);
        }
        if (members.empty()) {
            warn("class " + std::to_string(cls) + " has no records; folds are not stratified for it");
            continue;
        }
        std::sort(members.begin(), members.end());
        Rng class_rng = rng.derive(static_cast<std::uint64_t>(cls));
        shuffle(members, class_rng);
        for (std::string& id : members) {
            plan.assignment.emplace(std::move(id), next_fold);
            next_fold = (next_fold + 1) % k;
        }
    }
    return plan;
}

std::pair<Dataset, Dataset> split_fold(const Dataset& dataset, const FoldPlan& plan, std::size_t fold) {
    std::pair<Dataset, Dataset> out;
    out.first.name = dataset.name + "-train" + std::to_string(fold);
    out.second.name = dataset.name + "-fold" + std::to_string(fold);
    for (const SentenceRecord& r : dataset.records) {
        (plan.fold_of(r.id) == fold ? out.second : out.first).records.push_back(r);
    }
    return out;
}

}  // namespace dcl
