// Versioned plain-text checkpoint. Layout:
//
//   dcl-checkpoint <version>
//   [model]      epochs_completed, features, feature_dim, hash settings
//   [config]     key = value echo of TrainConfig
//   [head]       rows, cols, weights, bias
//   [projection] rows, cols, values (absent when disabled)
//   [optimizer]  step, order, first.<param>, second.<param>
//   [history]    one "epoch = ..." line per completed epoch
//
// Every real number is written with 17 significant digits.

#include <fstream>
#include <map>
#include <sstream>

#include "dcl/trainer.hpp"
#include "text_util.hpp"

namespace dcl {

namespace {

constexpr const char* kMagic = "dcl-checkpoint";

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != 0) out.push_back(' ');
        out += format_double(values[i]);
    }
    return out;
}

std::string counts_text(const ConfusionMatrix& cm) {
    return std::to_string(cm.tp) + " " + std::to_string(cm.fp) + " " + std::to_string(cm.fn) + " " +
           std::to_string(cm.tn);
}

using Section = std::vector<std::pair<std::string, std::string>>;

class Reader {
public:
    Reader(std::map<std::string, Section> sections, std::string origin)
        : sections_(std::move(sections)), origin_(std::move(origin)) {}

    bool has(const std::string& section) const { return sections_.contains(section); }

    const Section& section(const std::string& name) const {
        const auto it = sections_.find(name);
        if (it == sections_.end()) fail("missing section [" + name + "]");
        return it->second;
    }

    std::string get(const std::string& sec, const std::string& key) const {
        for (const auto& [k, v] : section(sec)) {
            if (k == key) return v;
        }
        fail("missing key '" + key + "' in [" + sec + "]");
    }

    std::size_t count(const std::string& sec, const std::string& key) const {
        std::size_t out = 0;
        if (!detail::parse_size(get(sec, key), out)) fail("bad integer for '" + key + "'");
        return out;
    }

    Vector reals(const std::string& text, std::size_t expected, const std::string& what) const {
        const auto tokens = detail::split_whitespace(text);
        if (tokens.size() != expected) {
            fail(what + ": expected " + std::to_string(expected) + " values, found " + std::to_string(tokens.size()));
        }
        Vector out(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (!parse_double(tokens[i], out[i])) fail(what + ": malformed number '" + tokens[i] + "'");
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw data_error("checkpoint " + origin_ + ": " + message);
    }

private:
    std::map<std::string, Section> sections_;
    std::string origin_;
};

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write checkpoint " + path.string());
    out << kMagic << ' ' << kCheckpointVersion << '\n';

    out << "[model]\n";
    out << "epochs_completed = " << model.epochs_completed() << '\n';
    out << "features = " << (model.features.from_store ? "store" : "hash") << '\n';
    out << "feature_dim = " << model.features.dim << '\n';
    out << "hash_buckets = " << model.features.hash.buckets << '\n';
    out << "ngram_window = " << model.features.hash.window << '\n';

    out << "[config]\n" << config_to_text(model.config);

    out << "[head]\n";
    out << "rows = " << model.head.weights.rows() << '\n';
    out << "cols = " << model.head.weights.cols() << '\n';
    out << "weights = " << join(model.head.weights.values()) << '\n';
    out << "bias = " << (model.head.has_bias() ? join(model.head.bias) : "none") << '\n';

    if (model.projection) {
        out << "[projection]\n";
        out << "rows = " << model.projection->rows() << '\n';
        out << "cols = " << model.projection->cols() << '\n';
        out << "values = " << join(model.projection->values()) << '\n';
    }

    out << "[optimizer]\n";
    out << "step = " << model.optimizer.step << '\n';
    std::string order;
    for (const MomentBuffers& mb : model.optimizer.moments) order += (order.empty() ? "" : " ") + mb.name;
    out << "order = " << order << '\n';
    for (const MomentBuffers& mb : model.optimizer.moments) {
        out << "first." << mb.name << " = " << join(mb.first) << '\n';
        out << "second." << mb.name << " = " << join(mb.second) << '\n';
    }

    out << "[history]\n";
    for (const EpochReport& r : model.history) {
        const Vector losses{r.loss.cl_se, r.loss.cl_su, r.loss.cl, r.loss.fl, r.loss.total};
        out << "epoch = " << r.epoch << ' ' << join(losses) << ' ' << counts_text(r.train_metrics.counts);
        if (r.validation) out << ' ' << counts_text(r.validation->counts);
        out << '\n';
    }
    if (!out) throw data_error("failed writing checkpoint " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error("checkpoint " + path.string() + " is empty");
    {
        std::istringstream magic(line);
        std::string word;
        int version = 0;
        magic >> word >> version;
        if (word != kMagic) throw data_error("checkpoint " + path.string() + ": not a checkpoint file");
        if (version != kCheckpointVersion) {
            throw data_error("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
        }
    }

    std::map<std::string, Section> sections;
    std::string current;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']') {
            current = std::string(t.substr(1, t.size() - 2));
            sections[current];
            continue;
        }
        const auto eq = t.find('=');
        if (current.empty() || eq == std::string_view::npos) {
            throw data_error("checkpoint " + path.string() + ":" + std::to_string(line_no) + ": malformed line");
        }
        sections[current].emplace_back(std::string(detail::trim(t.substr(0, eq))),
                                       std::string(detail::trim(t.substr(eq + 1))));
    }
    const Reader rd(std::move(sections), path.string());

    TrainedModel model;
    std::string config_text;
    for (const auto& [k, v] : rd.section("config")) config_text += k + " = " + v + "\n";
    try {
        model.config = parse_config_text(config_text, path.string() + " [config]");
    } catch (const Error& e) {
        rd.fail(e.what());
    }

    const std::string features = rd.get("model", "features");
    if (features != "hash" && features != "store") rd.fail("unknown feature source '" + features + "'");
    model.features.from_store = features == "store";
    model.features.dim = rd.count("model", "feature_dim");
    model.features.hash.buckets = rd.count("model", "hash_buckets");
    model.features.hash.window = rd.count("model", "ngram_window");

    const std::size_t rows = rd.count("head", "rows");
    const std::size_t cols = rd.count("head", "cols");
    if (cols != kNumClasses || rows == 0) rd.fail("classifier head must be d x 2");
    model.head.weights = Matrix(rows, cols, rd.reals(rd.get("head", "weights"), rows * cols, "head weights"));
    const std::string bias = rd.get("head", "bias");
    if (bias != "none") model.head.bias = rd.reals(bias, kNumClasses, "head bias");

    if (rd.has("projection")) {
        const std::size_t pr = rd.count("projection", "rows");
        const std::size_t pc = rd.count("projection", "cols");
        model.projection = Matrix(pr, pc, rd.reals(rd.get("projection", "values"), pr * pc, "projection"));
    }

    model.optimizer.step = rd.count("optimizer", "step");
    for (const std::string& name : detail::split_whitespace(rd.get("optimizer", "order"))) {
        std::size_t size = 0;
        if (name == "head.weights") size = model.head.weights.size();
        else if (name == "head.bias") size = model.head.bias.size();
        else if (name == "projection" && model.projection) size = model.projection->size();
        else rd.fail("unknown optimizer parameter '" + name + "'");
        model.optimizer.moments.push_back({name, rd.reals(rd.get("optimizer", "first." + name), size, name),
                                           rd.reals(rd.get("optimizer", "second." + name), size, name)});
    }

    for (const auto& [key, value] : rd.section("history")) {
        if (key != "epoch") rd.fail("unexpected history key '" + key + "'");
        const auto tokens = detail::split_whitespace(value);
        if (tokens.size() != 10 && tokens.size() != 14) rd.fail("malformed history line");
        EpochReport r;
        if (!detail::parse_size(tokens[0], r.epoch)) rd.fail("malformed epoch index");
        std::string joined;
        for (std::size_t i = 1; i <= 5; ++i) joined += tokens[i] + " ";
        const Vector v = rd.reals(joined, 5, "history losses");
        r.loss = {v[0], v[1], v[2], v[3], v[4]};
        const auto read_counts = [&](std::size_t at) {
            ConfusionMatrix cm;
            std::size_t* fields[] = {&cm.tp, &cm.fp, &cm.fn, &cm.tn};
            for (std::size_t i = 0; i < 4; ++i) {
                if (!detail::parse_size(tokens[at + i], *fields[i])) rd.fail("malformed confusion counts");
            }
            return metrics(cm);
        };
        r.train_metrics = read_counts(6);
        if (tokens.size() == 14) r.validation = read_counts(10);
        model.history.push_back(r);
    }
    if (model.history.size() != rd.count("model", "epochs_completed")) {
        rd.fail("history length does not match epochs_completed");
    }
    return model;
}

}  // namespace dcl
