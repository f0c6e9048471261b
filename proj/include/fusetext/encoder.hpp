#pragma once

// Miniature bidirectional transformer encoder: summed token/position/segment
// embeddings, post-norm transformer blocks producing the token-level states,
// one more block for the sequence-level states, and their per-position
// concatenation.

#include <cmath>
#include <string>
#include <vector>

#include "fusetext/autodiff.hpp"
#include "fusetext/random.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::encoder {

struct EncoderConfig {
    std::size_t d = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t ffn_dim = 128;
    std::size_t max_len = 64;
    std::size_t vocab_size = 0;
    std::size_t segments = 2;

    void validate() const {
        if (d == 0 || layers == 0 || heads == 0 || ffn_dim == 0 || vocab_size == 0 || segments == 0)
            throw ValidationError("encoder dimensions must be positive");
        if (d % heads != 0)
            throw ValidationError("encoder d=" + std::to_string(d) + " not divisible by heads=" + std::to_string(heads));
        if (max_len < 2) throw ValidationError("encoder max_len must be at least 2");
    }
};

inline constexpr double kLayerNormEps = 1e-12;

inline const std::string kTokenTable = "encoder.embeddings.token";
inline const std::string kPositionTable = "encoder.embeddings.position";
inline const std::string kSegmentTable = "encoder.embeddings.segment";
inline const std::string kSequenceBlock = "sequence_layer";

inline std::string layer_prefix(std::size_t i) { return "encoder.layer" + std::to_string(i); }

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(fan_in, fan_out);
    for (double& v : t.data()) v = uniform(rng, -limit, limit);
    return t;
}

inline std::vector<std::string> block_param_names(const std::string& prefix) {
    std::vector<std::string> names;
    for (const char* n : {"attn.w_q", "attn.b_q", "attn.w_k", "attn.b_k", "attn.w_v", "attn.b_v", "attn.w_o",
                          "attn.b_o", "ln1.gamma", "ln1.beta", "ffn.w_1", "ffn.b_1", "ffn.w_2", "ffn.b_2",
                          "ln2.gamma", "ln2.beta"})
        names.push_back(prefix + "." + n);
    return names;
}

inline void init_block(ParamStore& store, const std::string& prefix, std::size_t d, std::size_t ffn_dim, Rng& rng) {
    for (const char* proj : {"q", "k", "v", "o"}) {
        store[prefix + ".attn.w_" + proj] = xavier_uniform(d, d, rng);
        store[prefix + ".attn.b_" + proj] = Tensor(1, d);
    }
    store[prefix + ".ln1.gamma"] = Tensor(1, d, 1.0);
    store[prefix + ".ln1.beta"] = Tensor(1, d);
    store[prefix + ".ffn.w_1"] = xavier_uniform(d, ffn_dim, rng);
    store[prefix + ".ffn.b_1"] = Tensor(1, ffn_dim);
    store[prefix + ".ffn.w_2"] = xavier_uniform(ffn_dim, d, rng);
    store[prefix + ".ffn.b_2"] = Tensor(1, d);
    store[prefix + ".ln2.gamma"] = Tensor(1, d, 1.0);
    store[prefix + ".ln2.beta"] = Tensor(1, d);
}

inline void init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    store[kTokenTable] = xavier_uniform(cfg.vocab_size, cfg.d, rng);
    store[kPositionTable] = xavier_uniform(cfg.max_len, cfg.d, rng);
    store[kSegmentTable] = xavier_uniform(cfg.segments, cfg.d, rng);
    for (std::size_t i = 0; i < cfg.layers; ++i) init_block(store, layer_prefix(i), cfg.d, cfg.ffn_dim, rng);
    init_block(store, kSequenceBlock, cfg.d, cfg.ffn_dim, rng);
}

inline std::vector<std::string> encoder_param_names(const EncoderConfig& cfg) {
    std::vector<std::string> names{kTokenTable, kPositionTable, kSegmentTable};
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        auto block = block_param_names(layer_prefix(i));
        names.insert(names.end(), block.begin(), block.end());
    }
    auto seq = block_param_names(kSequenceBlock);
    names.insert(names.end(), seq.begin(), seq.end());
    return names;
}

inline Var bind_param(Tape& tape, const ParamStore& store, const std::string& name) {
    auto it = store.find(name);
    if (it == store.end()) throw ContractError("missing parameter tensor '" + name + "'");
    return tape.parameter(name, it->second);
}

// X_i = E(t_i) + P(i) + S(i)
inline Var embed_inputs(Tape& tape, const ParamStore& store, const EncoderConfig& cfg,
                        const std::vector<std::size_t>& token_ids, const std::vector<std::size_t>& segment_ids) {
    if (token_ids.empty()) throw ContractError("embed_inputs: empty token sequence");
    if (token_ids.size() > cfg.max_len) {
        throw ContractError("embed_inputs: " + std::to_string(token_ids.size()) + " tokens exceed max_len " +
                            std::to_string(cfg.max_len));
    }
    if (segment_ids.size() != token_ids.size()) throw ContractError("embed_inputs: segment ids misaligned");
    std::vector<std::size_t> positions(token_ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    Var tok = ad::gather_rows(bind_param(tape, store, kTokenTable), token_ids);
    Var pos = ad::gather_rows(bind_param(tape, store, kPositionTable), positions);
    Var seg = ad::gather_rows(bind_param(tape, store, kSegmentTable), segment_ids);
    return ad::add(ad::add(tok, pos), seg);
}

// Optional inspection hooks for tests.
struct BlockTrace {
    std::vector<Tensor> attention;  // one n x n matrix per head
    Tensor ln1_normalized;          // layer-norm output before scale/shift
    Tensor ln2_normalized;
};

inline Var layer_norm(Tape& tape, const ParamStore& store, const std::string& prefix, Var x, Tensor* normalized) {
    Var z = ad::normalize_rows(x, kLayerNormEps);
    if (normalized) *normalized = z.value();
    return ad::add_row(ad::mul_row(z, bind_param(tape, store, prefix + ".gamma")), bind_param(tape, store, prefix + ".beta"));
}

inline Var linear(Tape& tape, const ParamStore& store, const std::string& w, const std::string& b, Var x) {
    return ad::add_row(ad::matmul(x, bind_param(tape, store, w)), bind_param(tape, store, b));
}

// Post-norm block: LN(x + MHA(x)), then LN(h + FFN(h)) with GELU.
inline Var transformer_block(Tape& tape, const ParamStore& store, const std::string& prefix, Var x,
                             std::size_t heads, BlockTrace* trace = nullptr) {
    const std::size_t d = x.cols();
    if (heads == 0 || d % heads != 0) throw ContractError("transformer_block: d not divisible by heads");
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Var q = linear(tape, store, prefix + ".attn.w_q", prefix + ".attn.b_q", x);
    Var k = linear(tape, store, prefix + ".attn.w_k", prefix + ".attn.b_k", x);
    Var v = linear(tape, store, prefix + ".attn.w_v", prefix + ".attn.b_v", x);

    Var context;
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = ad::slice_cols(q, h * dh, dh);
        Var kh = ad::slice_cols(k, h * dh, dh);
        Var vh = ad::slice_cols(v, h * dh, dh);
        Var weights = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt_dh));
        if (trace) trace->attention.push_back(weights.value());
        Var head_out = ad::matmul(weights, vh);
        context = h == 0 ? head_out : ad::concat_cols(context, head_out);
    }
    Var attn = linear(tape, store, prefix + ".attn.w_o", prefix + ".attn.b_o", context);
    Var h1 = layer_norm(tape, store, prefix + ".ln1", ad::add(x, attn), trace ? &trace->ln1_normalized : nullptr);

    Var ff = ad::gelu(linear(tape, store, prefix + ".ffn.w_1", prefix + ".ffn.b_1", h1));
    ff = linear(tape, store, prefix + ".ffn.w_2", prefix + ".ffn.b_2", ff);
    return layer_norm(tape, store, prefix + ".ln2", ad::add(h1, ff), trace ? &trace->ln2_normalized : nullptr);
}

inline Var encoder_forward(Tape& tape, const ParamStore& store, const EncoderConfig& cfg, Var x,
                           std::vector<BlockTrace>* traces = nullptr) {
    Var h = x;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        BlockTrace* tr = nullptr;
        if (traces) tr = &traces->emplace_back();
        h = transformer_block(tape, store, layer_prefix(i), h, cfg.heads, tr);
    }
    return h;
}

inline Var sequence_layer(Tape& tape, const ParamStore& store, const EncoderConfig& cfg, Var h_token,
                          BlockTrace* trace = nullptr) {
    return transformer_block(tape, store, kSequenceBlock, h_token, cfg.heads, trace);
}

// Row i is [h_i ; s_i].
inline Var fuse_token_sequence(Var h_token, Var h_sequence) {
    if (h_token.shape() != h_sequence.shape()) {
        throw ShapeError("fuse_token_sequence: " + shape_string(h_token.shape()) + " vs " +
                         shape_string(h_sequence.shape()));
    }
    return ad::concat_cols(h_token, h_sequence);
}

struct EncoderOutput {
    Var h_token;     // n x d
    Var h_sequence;  // n x d
    Var h_cls;       // 1 x d, row 0 of h_token
    Var h_concat;    // n x 2d
};

inline EncoderOutput encode(Tape& tape, const ParamStore& store, const EncoderConfig& cfg,
                            const std::vector<std::size_t>& token_ids, const std::vector<std::size_t>& segment_ids) {
    EncoderOutput out;
    Var x = embed_inputs(tape, store, cfg, token_ids, segment_ids);
    out.h_token = encoder_forward(tape, store, cfg, x);
    out.h_sequence = sequence_layer(tape, store, cfg, out.h_token);
    out.h_cls = ad::slice_rows(out.h_token, 0, 1);
    out.h_concat = fuse_token_sequence(out.h_token, out.h_sequence);
    return out;
}

}  // namespace fusetext::encoder
