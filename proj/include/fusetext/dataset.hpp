#pragma once

// Dataset CSV ingestion, stratified splitting and the JSON run configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusetext/encoder.hpp"
#include "fusetext/errors.hpp"
#include "fusetext/heads.hpp"
#include "fusetext/lda.hpp"
#include "fusetext/losses.hpp"
#include "fusetext/random.hpp"

namespace fusetext::data {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV (RFC 4180 quoting; quoted fields may hold commas, quotes and newlines).

struct CsvRecord {
    std::vector<std::string> fields;
    std::size_t line = 0;  // line on which the record starts
};

inline std::vector<CsvRecord> parse_csv(std::istream& in) {
    std::vector<CsvRecord> records;
    CsvRecord rec;
    std::string field;
    bool quoted = false, field_started = false, any = false;
    std::size_t line = 1;
    rec.line = 1;
    char ch;
    auto end_field = [&] {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(rec));
        rec = CsvRecord{};
        rec.line = line;
        any = false;
    };
    while (in.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = field_started = any = true;
        } else if (ch == ',') {
            end_field();
            any = true;
        } else if (ch == '\n') {
            ++line;
            if (any || !rec.fields.empty()) end_record();
            else rec.line = line;
        } else if (ch == '\r') {
            // CRLF line ends
        } else {
            field.push_back(ch);
            field_started = any = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field starting near line " + std::to_string(rec.line));
    if (any || !rec.fields.empty()) end_record();
    return records;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

// ---------------------------------------------------------------------------

struct LabelSet {
    std::vector<std::string> names;
    std::vector<bool> harmful;

    std::size_t size() const { return names.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }
    void validate() const {
        if (names.empty()) throw ValidationError("label_set is empty");
        std::set<std::string> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second) throw ValidationError("duplicate label '" + n + "' in label_set");
        if (harmful.size() != names.size())
            throw ValidationError("harmful_mask has " + std::to_string(harmful.size()) + " entries for " +
                                  std::to_string(names.size()) + " labels");
        heads::validate_mask(harmful);
    }
};

inline LabelSet default_label_set() {
    return {{"not_cyberbullying", "gender", "religion", "age", "ethnicity", "other_cyberbullying"},
            {false, true, true, true, true, true}};
}

struct LabeledExample {
    std::string text;
    std::size_t class_label = 0;
    int binary_label = 0;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

inline LabeledExample make_example(std::string text, std::size_t class_label, const LabelSet& labels) {
    return {std::move(text), class_label, labels.harmful.at(class_label) ? 1 : 0};
}

inline std::vector<LabeledExample> load_dataset(std::istream& in, const LabelSet& labels,
                                                const std::string& source = "dataset") {
    const auto records = parse_csv(in);
    if (records.empty()) throw ParseError(source + ": empty file");
    const auto& header = records.front().fields;
    std::optional<std::size_t> text_col, label_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "tweet_text") text_col = i;
        if (header[i] == "cyberbullying_type") label_col = i;
    }
    if (!text_col) throw ParseError(source + ": missing column 'tweet_text'");
    if (!label_col) throw ParseError(source + ": missing column 'cyberbullying_type'");

    std::vector<LabeledExample> out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = source + " row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
        if (rec.fields.size() != header.size())
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(rec.fields.size()));
        const auto idx = labels.index_of(rec.fields[*label_col]);
        if (!idx) throw ValidationError(where + ": unknown label '" + rec.fields[*label_col] + "'");
        out.push_back(make_example(rec.fields[*text_col], *idx, labels));
    }
    if (out.empty()) throw ParseError(source + ": no data rows");
    return out;
}

inline std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, const LabelSet& labels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset file " + path.string());
    return load_dataset(in, labels, path.string());
}

inline void write_dataset(std::ostream& out, const std::vector<LabeledExample>& examples, const LabelSet& labels) {
    out << "tweet_text,cyberbullying_type\n";
    for (const auto& e : examples) out << csv_escape(e.text) << ',' << csv_escape(labels.names.at(e.class_label)) << '\n';
}

struct Split {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
};

// Stratified: per class, shuffle with the seeded engine and send
// floor(fraction * count) examples to train. Output order follows class
// order, then shuffled order within a class.
inline Split split(const std::vector<LabeledExample>& examples, double train_fraction, std::uint64_t seed,
                   const LabelSet* labels = nullptr) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractError("split: train_fraction must lie strictly between 0 and 1");
    if (examples.size() < 2) throw ContractError("split: need at least 2 examples");
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].class_label].push_back(i);
    Rng rng(seed);
    Split out;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 2) {
            const std::string name = labels ? labels->names.at(cls) : std::to_string(cls);
            throw ValidationError("split: class '" + name + "' has fewer than 2 examples");
        }
        shuffle(idx, rng);
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t j = 0; j < idx.size(); ++j) (j < n_train ? out.train : out.test).push_back(examples[idx[j]]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration.

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    double lambda_gate = 0.7;
    losses::LossWeights initial_weights{0.5, 0.5};
    bool balancing_enabled = true;
    bool class_weights_enabled = false;
    bool disable_aux = false;
    bool disable_cross_attention = false;
    bool disable_gating = false;
    double train_fraction = 0.8;

    void validate() const {
        if (epochs < 1) throw ValidationError("train.epochs must be at least 1");
        if (batch_size < 1) throw ValidationError("train.batch_size must be at least 1");
        if (!(learning_rate > 0.0)) throw ValidationError("train.learning_rate must be positive");
        heads::validate_gate(lambda_gate);
        initial_weights.validate();
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ValidationError("train.train_fraction must lie strictly between 0 and 1");
    }
};

struct LdaConfig {
    lda::LdaParams params;
    std::size_t infer_iterations = 50;
};

struct Paths {
    std::string glove;
    std::string vocab;
    std::string lexicon;
    std::string dataset;
};

struct RunConfig {
    LabelSet labels = default_label_set();
    encoder::EncoderConfig encoder;
    TrainConfig train;
    LdaConfig lda;
    Paths paths;
    std::size_t glove_dim = 100;

    void validate() const {
        labels.validate();
        auto enc = encoder;
        if (enc.vocab_size == 0) enc.vocab_size = 1;  // filled from the vocab file at train time
        enc.validate();
        train.validate();
        if (lda.params.topics < 2) throw ValidationError("lda.topics must be at least 2");
        if (!(lda.params.alpha > 0.0) || !(lda.params.beta > 0.0)) throw ValidationError("lda priors must be positive");
        if (lda.params.iterations < 1) throw ValidationError("lda.iterations must be at least 1");
        if (glove_dim == 0) throw ValidationError("glove_dim must be positive");
    }
};

namespace detail {

template <typename T>
void read(const json& obj, const char* key, T& dst) {
    if (!obj.is_object()) return;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

// Reads a non-negative integer, rejecting negatives before they wrap.
inline void read_count(const json& obj, const char* key, std::size_t& dst) {
    if (!obj.is_object()) return;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ValidationError(std::string("config key '") + key + "' must be a non-negative integer");
    dst = it->get<std::size_t>();
}

inline const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    auto it = root.find(key);
    if (it == root.end()) return empty;
    if (!it->is_object()) throw ValidationError(std::string("config section '") + key + "' must be an object");
    return *it;
}

}  // namespace detail

inline RunConfig config_from_json(const json& root) {
    if (!root.is_object()) throw ValidationError("config must be a JSON object");
    RunConfig cfg;
    if (root.contains("label_set")) {
        detail::read(root, "label_set", cfg.labels.names);
        cfg.labels.harmful.assign(cfg.labels.names.size(), true);
        for (std::size_t i = 0; i < cfg.labels.names.size(); ++i)
            if (cfg.labels.names[i] == "not_cyberbullying") cfg.labels.harmful[i] = false;
    }
    if (root.contains("harmful_mask")) detail::read(root, "harmful_mask", cfg.labels.harmful);

    const json& enc = detail::section(root, "encoder");
    detail::read_count(enc, "d", cfg.encoder.d);
    detail::read_count(enc, "layers", cfg.encoder.layers);
    detail::read_count(enc, "heads", cfg.encoder.heads);
    detail::read_count(enc, "ffn_dim", cfg.encoder.ffn_dim);
    detail::read_count(enc, "max_len", cfg.encoder.max_len);
    detail::read_count(enc, "vocab_size", cfg.encoder.vocab_size);

    const json& tr = detail::section(root, "train");
    detail::read_count(tr, "epochs", cfg.train.epochs);
    detail::read_count(tr, "batch_size", cfg.train.batch_size);
    detail::read(tr, "learning_rate", cfg.train.learning_rate);
    detail::read(tr, "seed", cfg.train.seed);
    detail::read(tr, "lambda_gate", cfg.train.lambda_gate);
    detail::read(tr, "lambda1", cfg.train.initial_weights.lambda1);
    detail::read(tr, "lambda2", cfg.train.initial_weights.lambda2);
    detail::read(tr, "balancing_enabled", cfg.train.balancing_enabled);
    detail::read(tr, "class_weights_enabled", cfg.train.class_weights_enabled);
    detail::read(tr, "disable_aux", cfg.train.disable_aux);
    detail::read(tr, "disable_cross_attention", cfg.train.disable_cross_attention);
    detail::read(tr, "disable_gating", cfg.train.disable_gating);
    detail::read(tr, "train_fraction", cfg.train.train_fraction);

    const json& l = detail::section(root, "lda");
    detail::read_count(l, "topics", cfg.lda.params.topics);
    detail::read(l, "alpha", cfg.lda.params.alpha);
    detail::read(l, "beta", cfg.lda.params.beta);
    detail::read_count(l, "iterations", cfg.lda.params.iterations);
    detail::read_count(l, "infer_iterations", cfg.lda.infer_iterations);

    const json& p = detail::section(root, "paths");
    detail::read(p, "glove", cfg.paths.glove);
    detail::read(p, "vocab", cfg.paths.vocab);
    detail::read(p, "lexicon", cfg.paths.lexicon);
    detail::read(p, "dataset", cfg.paths.dataset);
    detail::read_count(root, "glove_dim", cfg.glove_dim);

    cfg.validate();
    return cfg;
}

inline json config_to_json(const RunConfig& cfg) {
    json j;
    j["label_set"] = cfg.labels.names;
    j["harmful_mask"] = cfg.labels.harmful;
    j["encoder"] = {{"d", cfg.encoder.d},           {"layers", cfg.encoder.layers},
                    {"heads", cfg.encoder.heads},   {"ffn_dim", cfg.encoder.ffn_dim},
                    {"max_len", cfg.encoder.max_len}, {"vocab_size", cfg.encoder.vocab_size}};
    const auto& t = cfg.train;
    j["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"learning_rate", t.learning_rate},
                  {"seed", t.seed},
                  {"lambda_gate", t.lambda_gate},
                  {"lambda1", t.initial_weights.lambda1},
                  {"lambda2", t.initial_weights.lambda2},
                  {"balancing_enabled", t.balancing_enabled},
                  {"class_weights_enabled", t.class_weights_enabled},
                  {"disable_aux", t.disable_aux},
                  {"disable_cross_attention", t.disable_cross_attention},
                  {"disable_gating", t.disable_gating},
                  {"train_fraction", t.train_fraction}};
    j["lda"] = {{"topics", cfg.lda.params.topics},
                {"alpha", cfg.lda.params.alpha},
                {"beta", cfg.lda.params.beta},
                {"iterations", cfg.lda.params.iterations},
                {"infer_iterations", cfg.lda.infer_iterations}};
    j["paths"] = {{"glove", cfg.paths.glove},
                  {"vocab", cfg.paths.vocab},
                  {"lexicon", cfg.paths.lexicon},
                  {"dataset", cfg.paths.dataset}};
    j["glove_dim"] = cfg.glove_dim;
    return j;
}

// Relative paths inside the file resolve against the file's directory.
inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
    RunConfig cfg = config_from_json(root);
    const auto base = std::filesystem::absolute(path).parent_path();
    for (std::string* p : {&cfg.paths.glove, &cfg.paths.vocab, &cfg.paths.lexicon, &cfg.paths.dataset}) {
        if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    }
    return cfg;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return config_to_json(a) == config_to_json(b); }

// FUSETEXT_SEED, when set, overrides the configured seed.
inline void apply_seed_override(RunConfig& cfg) {
    if (const char* env = std::getenv("FUSETEXT_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument(env);
            cfg.train.seed = v;
        } catch (const std::exception&) {
            throw ValidationError(std::string("FUSETEXT_SEED is not an unsigned integer: '") + env + "'");
        }
    }
}

}  // namespace fusetext::data
