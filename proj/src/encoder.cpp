#include "dcl/encoder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dcl/error.hpp"
#include "text_util.hpp"

namespace dcl {

ClassifierHead ClassifierHead::initialize(std::size_t input_dim, bool with_bias, Rng& rng) {
    if (input_dim == 0) throw usage_error("classifier input dimension must be positive");
    ClassifierHead head;
    head.weights = Matrix(input_dim, kNumClasses);
    const double half_width = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (double& w : head.weights.values()) w = rng.uniform(-half_width, half_width);
    if (with_bias) head.bias.assign(kNumClasses, 0.0);
    return head;
}

Vector head_logits(const ClassifierHead& head, std::span<const double> z) {
    const Matrix& w = head.weights;
    if (z.size() != w.rows()) {
        throw usage_error("sentence vector has dimension " + std::to_string(z.size()) +
                          " but the classifier expects " + std::to_string(w.rows()));
    }
    Vector logits(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) logits[c] += z[r] * w(r, c);
    }
    if (head.has_bias()) {
        for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += head.bias[c];
    }
    return logits;
}

Vector predict(const ClassifierHead& head, std::span<const double> z) {
    return softmax(head_logits(head, z));
}

int predicted_class(const ClassifierHead& head, std::span<const double> z) {
    const Vector p = predict(head, z);
    return p[1] > p[0] ? 1 : 0;
}

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t salt) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ salt;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

void add_feature(std::span<double> row, std::string_view gram, std::uint64_t salt) {
    const std::uint64_t h = fnv1a(gram, salt);
    const std::size_t bucket = static_cast<std::size_t>(h % row.size());
    row[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
}

}  // namespace

TokenEmbeddingMatrix hash_featurize(std::string_view text, std::size_t buckets, std::size_t window) {
    if (buckets < 8) throw usage_error("hash featurizer needs at least 8 buckets");
    if (window < 2) throw usage_error("n-gram window must be at least 2");
    const std::vector<std::string> tokens = detail::split_whitespace(text);
    if (tokens.empty()) throw data_error("empty sentence");

    TokenEmbeddingMatrix emb(tokens.size(), buckets);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const std::string token = detail::ascii_lower(tokens[t]);
        auto row = emb.row(t);
        add_feature(row, token, 0);
        for (std::size_t n = 2; n <= window; ++n) {
            if (token.size() < n) break;
            for (std::size_t i = 0; i + n <= token.size(); ++i) {
                add_feature(row, std::string_view(token).substr(i, n), n);
            }
        }
        const double len = norm(row);
        if (len > 0.0) {
            for (double& x : row) x /= len;
        }
    }
    return emb;
}

SentenceVector max_pool(const TokenEmbeddingMatrix& emb) {
    if (emb.rows() == 0 || emb.cols() == 0) throw usage_error("cannot pool an empty embedding matrix");
    SentenceVector out(emb.row(0).begin(), emb.row(0).end());
    for (std::size_t r = 1; r < emb.rows(); ++r) {
        const auto row = emb.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::max(out[c], row[c]);
    }
    return out;
}

namespace {

SentenceVector draw_view(std::span<const double> v, double rate, Rng& rng, std::vector<std::uint8_t>& mask) {
    SentenceVector view = apply_dropout(v, rate, rng, mask);
    if (norm(view) > kNormEpsilon) return view;
    view = apply_dropout(v, rate, rng, mask);
    if (norm(view) > kNormEpsilon) return view;
    throw numerical_error("augmentation collapse");
}

}  // namespace

AugmentedPair augment(std::span<const double> v, double rate, Rng& rng, std::string source_id,
                      DropoutMasks* masks) {
    if (norm(v) <= kNormEpsilon) throw numerical_error("cannot augment a zero sentence vector");
    DropoutMasks scratch;
    DropoutMasks& m = masks != nullptr ? *masks : scratch;
    AugmentedPair pair;
    pair.view_a = draw_view(v, rate, rng, m.a);
    pair.view_b = draw_view(v, rate, rng, m.b);
    pair.source_id = std::move(source_id);
    return pair;
}

const TokenEmbeddingMatrix& EmbeddingStore::at(const std::string& id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw data_error("no embedding for sentence id '" + id + "'");
    return it->second;
}

void EmbeddingStore::insert(std::string id, TokenEmbeddingMatrix emb) {
    if (emb.cols() != dim_) {
        throw data_error("embedding for '" + id + "' has dimension " + std::to_string(emb.cols()) +
                         ", store declares " + std::to_string(dim_));
    }
    if (emb.rows() == 0) throw data_error("embedding for '" + id + "' has no rows");
    if (!all_finite(emb.values())) throw data_error("embedding for '" + id + "' has non-finite values");
    const auto [it, inserted] = entries_.emplace(std::move(id), std::move(emb));
    if (!inserted) throw data_error("duplicate sentence id '" + it->first + "'");
}

std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open embedding file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    EmbeddingStore store;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!have_header) {
            if (detail::trim(line).empty()) continue;
            std::size_t dim = 0;
            const std::string_view head = detail::trim(line);
            if (!head.starts_with("dim=") || !detail::parse_size(head.substr(4), dim) || dim == 0) {
                throw data_error(where + ": expected header 'dim=<d_emb>'");
            }
            store = EmbeddingStore(dim);
            have_header = true;
            continue;
        }
        if (detail::trim(line).empty()) continue;

        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3) throw data_error(where + ": expected '<id> TAB <n> TAB <floats>'");
        const std::string id(fields[0]);
        std::size_t n = 0;
        if (!detail::parse_size(fields[1], n) || n == 0) {
            throw data_error(where + ": record '" + id + "' has an invalid token count");
        }
        const auto numbers = detail::split_whitespace(fields[2]);
        if (numbers.size() != n * store.dim()) {
            throw data_error(where + ": record '" + id + "' has " + std::to_string(numbers.size()) +
                             " values, expected " + std::to_string(n) + "x" + std::to_string(store.dim()));
        }
        std::vector<double> values(numbers.size());
        for (std::size_t i = 0; i < numbers.size(); ++i) {
            if (!parse_double(numbers[i], values[i])) {
                throw data_error(where + ": record '" + id + "' has a malformed number '" + numbers[i] + "'");
            }
        }
        if (store.contains(id)) throw data_error(where + ": duplicate sentence id '" + id + "'");
        try {
            store.insert(id, TokenEmbeddingMatrix(n, store.dim(), std::move(values)));
        } catch (const Error& e) {
            throw data_error(where + ": " + e.what());
        }
    }
    if (!have_header) warn("embedding file " + path.string() + " is empty");
    return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write embedding file " + path.string());
    out << "dim=" << store.dim() << '\n';
    for (const auto& [id, emb] : store.entries()) {
        out << id << '\t' << emb.rows() << '\t';
        const auto values = emb.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i != 0) out << ' ';
            out << format_double(values[i]);
        }
        out << '\n';
    }
    if (!out) throw data_error("failed writing embedding file " + path.string());
}

SentenceVector SentenceEncoder::encode(const std::string& id, std::string_view text) const {
    if (store_ != nullptr) return max_pool(store_->at(id));
    return max_pool(hash_featurize(text, hash_.buckets, hash_.window));
}

}  // namespace dcl
