#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"
#include "tokens.hpp"

namespace genmc {

// Architecture hyperparameters shared by every model kind.
struct ModelConfig {
    long d_model = 32;
    long n_heads = 4;
    long n_enc_layers = 2;
    long n_dec_layers = 2;
    long d_ff = 64;
    long vocab_size = 0;
    long max_source_len = 64;
    long max_target_len = 32;
    double dropout_rate = 0.0;  // kept at 0 for determinism

    long head_dim() const { return d_model / n_heads; }
    void validate() const;
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// additive attention masks use this at blocked positions; exp() underflows
// to exactly zero, which is what makes the masking properties exact
constexpr double kMaskValue = -1e9;

Tensor causal_mask(long len);

struct LayerNormParams {
    Tensor gamma, beta;
    void init(long d);
    void collect(const std::string& prefix, ParamList& out) const;
    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

struct MultiHeadAttention {
    long d_model = 0, n_heads = 0;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;

    void init(const ModelConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    // scaled dot-product over n_heads; mask, when given, is an additive
    // [Lq,Lk] matrix. attn_out, when given, receives per-head weight matrices.
    Tensor forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                   const Tensor* mask = nullptr, std::vector<Tensor>* attn_out = nullptr) const;
};

struct FeedForward {
    Tensor w1, b1, w2, b2;
    void init(const ModelConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    Tensor forward(const Tensor& x) const;
};

// Pre-norm residual block: x + Attn(LN(x)), then x + FFN(LN(x)).
struct EncoderLayer {
    MultiHeadAttention attn;
    FeedForward ffn;
    LayerNormParams ln1, ln2;
    void init(const ModelConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    Tensor forward(const Tensor& x, const Tensor* mask = nullptr) const;
};

struct DecoderLayer {
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;
    LayerNormParams ln1, ln2, ln3;
    void init(const ModelConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    Tensor forward(const Tensor& x, const Tensor& h_src, const Tensor* self_mask) const;
};

struct DecoderStepOut {
    Tensor logits;  // [V]
    Tensor probs;   // [V], softmax of logits
    Tensor hidden;  // [d], last-layer state for this step
};

// Per-layer residual streams accumulated during stepwise decoding.
struct DecoderCache {
    std::vector<Tensor> streams;
    std::vector<int> tokens;
    long len() const { return static_cast<long>(tokens.size()); }
};

// Encoder-decoder backbone with one shared token embedding, learned
// positions, and the decoder output projection tied to the embedding.
// GenMC and every baseline are built on top of this.
struct Backbone {
    ModelConfig cfg;
    Tensor token_embedding;  // [V, d]
    Tensor enc_pos;          // [max_source_len, d]
    Tensor dec_pos;          // [max_target_len, d]
    Tensor out_bias;         // [V]
    std::vector<EncoderLayer> enc_layers;
    std::vector<DecoderLayer> dec_layers;
    LayerNormParams enc_final_ln, dec_final_ln;

    void init(const ModelConfig& config, Rng& rng);
    void collect(ParamList& out) const;

    // Last-layer encoder states [d, L]. pad_mask, when nonempty, marks
    // non-PAD positions with true; masked keys get zero attention weight.
    Tensor encode(const std::vector<int>& token_ids,
                  const std::vector<bool>& pad_mask = {}) const;

    // Full teacher-forced decoder pass over BOS + targets[0..m-2];
    // k-th column conditions on the gold prefix. Returns states [d, m].
    Tensor decode_states(const std::vector<int>& target_ids, const Tensor& h_src) const;
    // logits over the vocabulary for a state matrix [d, m] -> [V, m]
    Tensor project_logits(const Tensor& states) const;
    // convenience: logits [V, m] for teacher forcing on target_ids
    Tensor teacher_forced_logits(const Tensor& h_src, const std::vector<int>& target_ids) const;

    // One autoregressive step; appends to the cache.
    DecoderStepOut decoder_step(int prev_token, DecoderCache& cache, const Tensor& h_src) const;

    // Greedy decoding from BOS until EOS or max_len. Returns the emitted
    // tokens (EOS excluded) and their hidden states [d, |C|]. Runs without
    // graph recording; the result carries no history.
    std::pair<std::vector<int>, Tensor> greedy_decode(const Tensor& h_src, long max_len) const;
};

}  // namespace genmc
