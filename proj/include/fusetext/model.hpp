#pragma once

// The full fusion classifier: featurization of raw text and the forward pass
// encoder -> auxiliary fusion -> dual attention -> hierarchical head.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fusetext/attention.hpp"
#include "fusetext/aux_features.hpp"
#include "fusetext/dataset.hpp"
#include "fusetext/encoder.hpp"
#include "fusetext/heads.hpp"
#include "fusetext/lda.hpp"
#include "fusetext/random.hpp"
#include "fusetext/text.hpp"

namespace fusetext {

inline const std::string kSelfScorer = "attention.w_s";
inline const std::string kCrossScorer = "attention.w_c";
inline const std::string kPrimaryWeight = "head.w_p";
inline const std::string kPrimaryBias = "head.b_p";
inline const std::string kBinaryWeight = "head.w_b";
inline const std::string kBinaryBias = "head.b_b";

struct Resources {
    text::WordPieceVocab vocab;
    text::GloveTable glove;
    aux::SentimentLexicon lexicon;
};

inline Resources load_resources(const data::Paths& paths, std::size_t glove_dim) {
    if (paths.vocab.empty()) throw ValidationError("config paths.vocab is not set");
    if (paths.glove.empty()) throw ValidationError("config paths.glove is not set");
    if (paths.lexicon.empty()) throw ValidationError("config paths.lexicon is not set");
    Resources r{text::load_vocab(paths.vocab), text::load_glove_table(paths.glove, glove_dim),
                aux::load_lexicon(paths.lexicon)};
    if (!r.vocab.contains(std::string(text::kClsToken)))
        throw ValidationError("vocab " + paths.vocab + " does not contain " + std::string(text::kClsToken));
    return r;
}

struct FeaturizedText {
    text::TokenizedTweet tokens;
    std::vector<std::size_t> token_ids;    // [CLS] + pieces, truncated to max_len
    std::vector<std::size_t> segment_ids;  // all zero: single-segment input
    aux::AuxEmbedding aux;
    Tensor aux_row;                        // 1 x aux dimension
};

class Featurizer {
public:
    Featurizer(const Resources& resources, const lda::LdaModel& topics, std::size_t max_len,
               std::size_t infer_iterations, std::uint64_t seed)
        : res_(&resources), lda_(&topics), max_len_(max_len), infer_iterations_(infer_iterations), seed_(seed) {}

    aux::AuxLayout layout() const { return {lda_->topics, res_->glove.dimension()}; }

    FeaturizedText operator()(std::string_view raw) const {
        FeaturizedText f;
        auto words = text::normalize_and_tokenize(raw);
        f.tokens = text::wordpiece_tokenize(words, res_->vocab);
        f.token_ids.push_back(*res_->vocab.find(std::string(text::kClsToken)));
        for (std::size_t id : f.tokens.token_ids) {
            if (f.token_ids.size() >= max_len_) break;
            f.token_ids.push_back(id);
        }
        f.segment_ids.assign(f.token_ids.size(), 0);
        const auto sentiment = aux::sentiment_features(f.tokens.words, res_->lexicon);
        const auto theta = lda::lda_infer(f.tokens.words, *lda_, infer_iterations_, seed_);
        const auto glove = aux::glove_mean(f.tokens.words, res_->glove);
        f.aux = aux::build_aux_embedding(sentiment, theta, glove, layout());
        f.aux_row = f.aux.as_row();
        return f;
    }

private:
    const Resources* res_;
    const lda::LdaModel* lda_;
    std::size_t max_len_;
    std::size_t infer_iterations_;
    std::uint64_t seed_;
};

// Shapes and switches of one fusion model.
struct ModelSpec {
    encoder::EncoderConfig encoder;
    std::size_t aux_dim = 0;
    std::vector<bool> harmful_mask;
    double lambda_gate = 0.7;
    bool disable_aux = false;
    bool disable_cross_attention = false;
    bool disable_gating = false;

    std::size_t classes() const { return harmful_mask.size(); }
    std::size_t d() const { return encoder.d; }
    std::size_t attention_width() const { return 4 * encoder.d + aux_dim; }
    double effective_gate() const { return disable_gating ? 1.0 : lambda_gate; }
};

inline ModelSpec make_spec(const data::RunConfig& cfg) {
    ModelSpec s;
    s.encoder = cfg.encoder;
    s.aux_dim = aux::AuxLayout{cfg.lda.params.topics, cfg.glove_dim}.dimension();
    s.harmful_mask = cfg.labels.harmful;
    s.lambda_gate = cfg.train.lambda_gate;
    s.disable_aux = cfg.train.disable_aux;
    s.disable_cross_attention = cfg.train.disable_cross_attention;
    s.disable_gating = cfg.train.disable_gating;
    return s;
}

// Every parameter tensor the model expects, with its shape.
inline std::map<std::string, Shape> expected_shapes(const ModelSpec& s) {
    ParamStore probe;
    Rng rng(0);
    encoder::init_encoder(probe, s.encoder, rng);
    std::map<std::string, Shape> shapes;
    for (const auto& [name, t] : probe) shapes[name] = t.shape();
    const std::size_t two_d = 2 * s.d();
    shapes[kSelfScorer] = {1, two_d};
    shapes[kCrossScorer] = {1, two_d + s.aux_dim};
    shapes[kPrimaryWeight] = {s.classes(), s.attention_width()};
    shapes[kPrimaryBias] = {1, s.classes()};
    shapes[kBinaryWeight] = {1, s.attention_width()};
    shapes[kBinaryBias] = {1, 1};
    return shapes;
}

inline ParamStore init_params(const ModelSpec& s, std::uint64_t seed) {
    s.encoder.validate();
    heads::validate_mask(s.harmful_mask);
    Rng rng(seed);
    ParamStore p;
    encoder::init_encoder(p, s.encoder, rng);
    auto scorer = [&rng](std::size_t rows, std::size_t cols) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Tensor t(rows, cols);
        for (double& v : t.data()) v = uniform(rng, -limit, limit);
        return t;
    };
    const std::size_t two_d = 2 * s.d();
    p[kSelfScorer] = scorer(1, two_d);
    p[kCrossScorer] = scorer(1, two_d + s.aux_dim);
    p[kPrimaryWeight] = scorer(s.classes(), s.attention_width());
    p[kPrimaryBias] = Tensor(1, s.classes());
    p[kBinaryWeight] = scorer(1, s.attention_width());
    p[kBinaryBias] = Tensor(1, 1);
    return p;
}

struct ForwardPass {
    encoder::EncoderOutput enc;
    attention::Fused fused;
    attention::Pooled self_pool;
    attention::Pooled cross_pool;
    Var h_att;
    Var y_primary;
    Var y_binary;
    Var expanded_binary;
    Var y_final;
};

inline ForwardPass forward(Tape& tape, const ParamStore& params, const ModelSpec& spec,
                           const std::vector<std::size_t>& token_ids, const std::vector<std::size_t>& segment_ids,
                           const Tensor& aux_row) {
    if (aux_row.shape() != Shape{1, spec.aux_dim}) {
        throw ShapeError("auxiliary embedding " + shape_string(aux_row.shape()) + " does not match model width " +
                         std::to_string(spec.aux_dim));
    }
    ForwardPass f;
    f.enc = encoder::encode(tape, params, spec.encoder, token_ids, segment_ids);
    Var aux = tape.constant(spec.disable_aux ? Tensor(1, spec.aux_dim) : aux_row);
    f.fused = attention::fuse_aux(f.enc.h_concat, aux);
    f.self_pool = attention::self_attention_pool(f.enc.h_concat, encoder::bind_param(tape, params, kSelfScorer));
    f.cross_pool = attention::cross_attention_pool(f.enc.h_concat, f.fused.e, encoder::bind_param(tape, params, kCrossScorer));
    Var h_ca = spec.disable_cross_attention ? tape.constant(Tensor(1, 2 * spec.d() + spec.aux_dim)) : f.cross_pool.pooled;
    f.h_att = attention::concat_attention(f.self_pool.pooled, h_ca);
    f.y_primary = heads::primary_head(f.h_att, encoder::bind_param(tape, params, kPrimaryWeight),
                                      encoder::bind_param(tape, params, kPrimaryBias));
    f.y_binary = heads::binary_head(f.h_att, encoder::bind_param(tape, params, kBinaryWeight),
                                    encoder::bind_param(tape, params, kBinaryBias));
    f.expanded_binary = heads::expand_binary(f.y_binary, f.y_primary, spec.harmful_mask);
    f.y_final = heads::gate_fuse(f.y_primary, f.expanded_binary, spec.effective_gate());
    return f;
}

inline heads::Prediction to_prediction(const ForwardPass& f) {
    heads::Prediction p;
    const auto yp = f.y_primary.value().data();
    const auto yf = f.y_final.value().data();
    p.y_primary.assign(yp.begin(), yp.end());
    p.y_final.assign(yf.begin(), yf.end());
    p.y_binary = f.y_binary.value()[0];
    p.predicted_class = heads::predict_class(p.y_final);
    return p;
}

inline heads::Prediction predict(const ParamStore& params, const ModelSpec& spec, const FeaturizedText& x) {
    Tape tape;
    return to_prediction(forward(tape, params, spec, x.token_ids, x.segment_ids, x.aux_row));
}

// Word-level view of the encoder: token-level states averaged over each
// word's pieces ([CLS] excluded). Rows follow x.tokens.words.
inline Tensor word_level_states(const ParamStore& params, const ModelSpec& spec, const FeaturizedText& x) {
    Tape tape;
    auto enc = encoder::encode(tape, params, spec.encoder, x.token_ids, x.segment_ids);
    const std::size_t pieces = x.token_ids.size() - 1;
    if (pieces == 0) return Tensor(0, spec.d());
    std::vector<std::size_t> align(x.tokens.piece_to_word.begin(),
                                   x.tokens.piece_to_word.begin() + static_cast<std::ptrdiff_t>(pieces));
    return text::word_average(ad::slice_rows(enc.h_token, 1, pieces), align).value();
}

}  // namespace fusetext
