#include "transformer.hpp"

#include <cmath>
#include <numeric>

namespace genmc {

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0 || n_enc_layers < 0 || n_dec_layers < 0)
        throw ValidationError("config: dimensions must be positive");
    if (d_model % n_heads != 0)
        throw ValidationError("config: d_model " + std::to_string(d_model) +
                              " not divisible by n_heads " + std::to_string(n_heads));
    if (max_source_len < 1 || max_target_len < 1)
        throw ValidationError("config: max lengths must be >= 1");
    if (vocab_size < tok::NUM_RESERVED)
        throw ValidationError("config: vocab_size " + std::to_string(vocab_size) +
                              " smaller than the reserved id range");
}

Tensor causal_mask(long len) {
    std::vector<double> m(static_cast<std::size_t>(len * len), 0.0);
    for (long i = 0; i < len; ++i)
        for (long j = i + 1; j < len; ++j) m[i * len + j] = kMaskValue;
    return Tensor::from_data({len, len}, std::move(m));
}

namespace {

constexpr double kInitStd = 0.02;

std::vector<int> iota_ids(long n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

}  // namespace

// ---- building blocks -------------------------------------------------------

void LayerNormParams::init(long d) {
    gamma = Tensor::full({d}, 1.0, true);
    beta = Tensor::zeros({d}, true);
}

void LayerNormParams::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

void MultiHeadAttention::init(const ModelConfig& cfg, Rng& rng) {
    d_model = cfg.d_model;
    n_heads = cfg.n_heads;
    const long d = cfg.d_model;
    wq = Tensor::randn({d, d}, rng, kInitStd);
    bq = Tensor::zeros({d}, true);
    wk = Tensor::randn({d, d}, rng, kInitStd);
    bk = Tensor::zeros({d}, true);
    wv = Tensor::randn({d, d}, rng, kInitStd);
    bv = Tensor::zeros({d}, true);
    wo = Tensor::randn({d, d}, rng, kInitStd);
    bo = Tensor::zeros({d}, true);
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".wq.weight", wq});
    out.push_back({prefix + ".wq.bias", bq});
    out.push_back({prefix + ".wk.weight", wk});
    out.push_back({prefix + ".wk.bias", bk});
    out.push_back({prefix + ".wv.weight", wv});
    out.push_back({prefix + ".wv.bias", bv});
    out.push_back({prefix + ".wo.weight", wo});
    out.push_back({prefix + ".wo.bias", bo});
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                                   const Tensor* mask, std::vector<Tensor>* attn_out) const {
    if (q_in.rows() != d_model || k_in.rows() != d_model || v_in.rows() != d_model)
        throw DimensionError("attention: input width does not match d_model " +
                             std::to_string(d_model));
    const long dh = d_model / n_heads;
    const Tensor q = affine(q_in, wq, bq);
    const Tensor k = affine(k_in, wk, bk);
    const Tensor v = affine(v_in, wv, bv);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (long h = 0; h < n_heads; ++h) {
        const Tensor qh = slice_rows(q, h * dh, (h + 1) * dh);
        const Tensor kh = slice_rows(k, h * dh, (h + 1) * dh);
        const Tensor vh = slice_rows(v, h * dh, (h + 1) * dh);
        Tensor scores = scale(matmul(transpose(qh), kh), inv_sqrt);
        if (mask) scores = add(scores, *mask);
        const Tensor weights = softmax(scores, 1);
        if (attn_out) attn_out->push_back(weights);
        heads.push_back(matmul(vh, transpose(weights)));
    }
    return affine(concat_rows(heads), wo, bo);
}

void FeedForward::init(const ModelConfig& cfg, Rng& rng) {
    w1 = Tensor::randn({cfg.d_ff, cfg.d_model}, rng, kInitStd);
    b1 = Tensor::zeros({cfg.d_ff}, true);
    w2 = Tensor::randn({cfg.d_model, cfg.d_ff}, rng, kInitStd);
    b2 = Tensor::zeros({cfg.d_model}, true);
}

void FeedForward::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w1.weight", w1});
    out.push_back({prefix + ".w1.bias", b1});
    out.push_back({prefix + ".w2.weight", w2});
    out.push_back({prefix + ".w2.bias", b2});
}

Tensor FeedForward::forward(const Tensor& x) const {
    return affine(relu(affine(x, w1, b1)), w2, b2);
}

void EncoderLayer::init(const ModelConfig& cfg, Rng& rng) {
    attn.init(cfg, rng);
    ffn.init(cfg, rng);
    ln1.init(cfg.d_model);
    ln2.init(cfg.d_model);
}

void EncoderLayer::collect(const std::string& prefix, ParamList& out) const {
    attn.collect(prefix + ".attn", out);
    ffn.collect(prefix + ".ffn", out);
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
}

Tensor EncoderLayer::forward(const Tensor& x, const Tensor* mask) const {
    const Tensor n1 = ln1(x);
    const Tensor a = add(x, attn.forward(n1, n1, n1, mask));
    return add(a, ffn.forward(ln2(a)));
}

void DecoderLayer::init(const ModelConfig& cfg, Rng& rng) {
    self_attn.init(cfg, rng);
    cross_attn.init(cfg, rng);
    ffn.init(cfg, rng);
    ln1.init(cfg.d_model);
    ln2.init(cfg.d_model);
    ln3.init(cfg.d_model);
}

void DecoderLayer::collect(const std::string& prefix, ParamList& out) const {
    self_attn.collect(prefix + ".self_attn", out);
    cross_attn.collect(prefix + ".cross_attn", out);
    ffn.collect(prefix + ".ffn", out);
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
    ln3.collect(prefix + ".ln3", out);
}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& h_src, const Tensor* self_mask) const {
    const Tensor n1 = ln1(x);
    const Tensor a = add(x, self_attn.forward(n1, n1, n1, self_mask));
    const Tensor c = add(a, cross_attn.forward(ln2(a), h_src, h_src));
    return add(c, ffn.forward(ln3(c)));
}

// ---- backbone ---------------------------------------------------------------

void Backbone::init(const ModelConfig& config, Rng& rng) {
    config.validate();
    cfg = config;
    token_embedding = Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kInitStd);
    enc_pos = Tensor::randn({cfg.max_source_len, cfg.d_model}, rng, kInitStd);
    dec_pos = Tensor::randn({cfg.max_target_len, cfg.d_model}, rng, kInitStd);
    out_bias = Tensor::zeros({cfg.vocab_size}, true);
    enc_layers.assign(static_cast<std::size_t>(cfg.n_enc_layers), {});
    for (auto& l : enc_layers) l.init(cfg, rng);
    dec_layers.assign(static_cast<std::size_t>(cfg.n_dec_layers), {});
    for (auto& l : dec_layers) l.init(cfg, rng);
    enc_final_ln.init(cfg.d_model);
    dec_final_ln.init(cfg.d_model);
}

void Backbone::collect(ParamList& out) const {
    out.push_back({"shared.token_embedding", token_embedding});
    out.push_back({"encoder.pos_embedding", enc_pos});
    out.push_back({"decoder.pos_embedding", dec_pos});
    out.push_back({"decoder.out_bias.bias", out_bias});
    for (std::size_t i = 0; i < enc_layers.size(); ++i)
        enc_layers[i].collect("encoder.layer" + std::to_string(i), out);
    for (std::size_t i = 0; i < dec_layers.size(); ++i)
        dec_layers[i].collect("decoder.layer" + std::to_string(i), out);
    enc_final_ln.collect("encoder.final_ln", out);
    dec_final_ln.collect("decoder.final_ln", out);
}

Tensor Backbone::encode(const std::vector<int>& token_ids, const std::vector<bool>& pad_mask) const {
    const long L = static_cast<long>(token_ids.size());
    if (L == 0) throw ContractError("encoder: empty input");
    if (L > cfg.max_source_len)
        throw ContractError("encoder: input length " + std::to_string(L) +
                            " exceeds max_source_len " + std::to_string(cfg.max_source_len));
    if (!pad_mask.empty() && static_cast<long>(pad_mask.size()) != L)
        throw DimensionError("encoder: pad mask length mismatch");
    Tensor x = add(embedding_lookup(token_embedding, token_ids),
                   embedding_lookup(enc_pos, iota_ids(L)));
    Tensor mask;
    bool use_mask = false;
    if (!pad_mask.empty()) {
        for (bool keep : pad_mask)
            if (!keep) use_mask = true;
        if (use_mask) {
            std::vector<double> m(static_cast<std::size_t>(L * L), 0.0);
            for (long j = 0; j < L; ++j)
                if (!pad_mask[static_cast<std::size_t>(j)])
                    for (long i = 0; i < L; ++i) m[i * L + j] = kMaskValue;
            mask = Tensor::from_data({L, L}, std::move(m));
        }
    }
    for (const auto& layer : enc_layers) x = layer.forward(x, use_mask ? &mask : nullptr);
    return enc_final_ln(x);
}

Tensor Backbone::decode_states(const std::vector<int>& target_ids, const Tensor& h_src) const {
    const long m = static_cast<long>(target_ids.size());
    if (m == 0) throw ContractError("decoder: empty target");
    if (m > cfg.max_target_len)
        throw ContractError("decoder: target length " + std::to_string(m) +
                            " exceeds max_target_len " + std::to_string(cfg.max_target_len));
    std::vector<int> input(static_cast<std::size_t>(m));
    input[0] = tok::BOS;
    for (long j = 1; j < m; ++j) input[static_cast<std::size_t>(j)] = target_ids[static_cast<std::size_t>(j - 1)];
    Tensor x = add(embedding_lookup(token_embedding, input),
                   embedding_lookup(dec_pos, iota_ids(m)));
    const Tensor mask = causal_mask(m);
    for (const auto& layer : dec_layers) x = layer.forward(x, h_src, &mask);
    return dec_final_ln(x);
}

Tensor Backbone::project_logits(const Tensor& states) const {
    // tied projection: logits = E . h + out_bias
    return affine(states, token_embedding, out_bias);
}

Tensor Backbone::teacher_forced_logits(const Tensor& h_src, const std::vector<int>& target_ids) const {
    return project_logits(decode_states(target_ids, h_src));
}

DecoderStepOut Backbone::decoder_step(int prev_token, DecoderCache& cache, const Tensor& h_src) const {
    const long t = cache.len();
    if (t >= cfg.max_target_len)
        throw ContractError("decoder_step: cache already holds max_target_len states");
    if (cache.streams.empty()) cache.streams.assign(dec_layers.size(), Tensor());
    Tensor x = add(embedding_lookup(token_embedding, {prev_token}),
                   embedding_lookup(dec_pos, {static_cast<int>(t)}));
    for (std::size_t l = 0; l < dec_layers.size(); ++l) {
        const DecoderLayer& layer = dec_layers[l];
        Tensor seq = cache.streams[l].defined() ? concat_time(cache.streams[l], x) : x;
        cache.streams[l] = seq;
        const Tensor n_seq = layer.ln1(seq);
        const Tensor q = reshape(select_column(n_seq, t), {cfg.d_model, 1});
        const Tensor attn = layer.self_attn.forward(q, n_seq, n_seq);
        const Tensor a = add(x, attn);
        const Tensor c = add(a, layer.cross_attn.forward(layer.ln2(a), h_src, h_src));
        x = add(c, layer.ffn.forward(layer.ln3(c)));
    }
    cache.tokens.push_back(prev_token);
    DecoderStepOut out;
    out.hidden = reshape(dec_final_ln(x), {cfg.d_model});
    out.logits = affine(out.hidden, token_embedding, out_bias);
    out.probs = softmax(out.logits, 0);
    return out;
}

std::pair<std::vector<int>, Tensor> Backbone::greedy_decode(const Tensor& h_src, long max_len) const {
    if (max_len > cfg.max_target_len)
        throw ContractError("greedy_decode: max_len exceeds max_target_len");
    NoGradGuard no_grad;
    DecoderCache cache;
    std::vector<int> clue;
    std::vector<double> hidden_cols;  // row-major [|C|][d], transposed at the end
    int prev = tok::BOS;
    for (long step = 0; step < max_len; ++step) {
        const DecoderStepOut out = decoder_step(prev, cache, h_src);
        int best = 0;
        double best_v = out.logits.at(0);
        for (long i = 1; i < cfg.vocab_size; ++i) {
            const double v = out.logits.at(i);
            if (v > best_v) {  // ties keep the lowest id
                best_v = v;
                best = static_cast<int>(i);
            }
        }
        if (best == tok::EOS) break;
        clue.push_back(best);
        hidden_cols.insert(hidden_cols.end(), out.hidden.data().begin(), out.hidden.data().end());
        prev = best;
    }
    const long c = static_cast<long>(clue.size());
    std::vector<double> h(static_cast<std::size_t>(cfg.d_model * c));
    for (long j = 0; j < c; ++j)
        for (long i = 0; i < cfg.d_model; ++i) h[i * c + j] = hidden_cols[j * cfg.d_model + i];
    return {clue, Tensor::from_data({cfg.d_model, c}, std::move(h))};
}

}  // namespace genmc
