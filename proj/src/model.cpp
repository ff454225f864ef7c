#include "model.hpp"

#include <algorithm>
#include <cmath>

#include "baselines.hpp"

namespace genmc {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "genmc") return ModelKind::GENMC;
    if (s == "t2t-vanilla") return ModelKind::T2T_VANILLA;
    if (s == "t2t-enc") return ModelKind::T2T_ENC;
    if (s == "weak-clue") return ModelKind::WEAK_CLUE;
    if (s == "token-clue") return ModelKind::TOKEN_CLUE;
    if (s == "clue-generator") return ModelKind::CLUE_GENERATOR;
    throw ValidationError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::GENMC: return "genmc";
        case ModelKind::T2T_VANILLA: return "t2t-vanilla";
        case ModelKind::T2T_ENC: return "t2t-enc";
        case ModelKind::WEAK_CLUE: return "weak-clue";
        case ModelKind::TOKEN_CLUE: return "token-clue";
        case ModelKind::CLUE_GENERATOR: return "clue-generator";
    }
    throw ContractError("unreachable model kind");
}

EncodedExample encode_example(const Vocab& vocab, const MCQAExample& ex, const ModelConfig& cfg) {
    ex.validate("example " + ex.id);
    EncodedExample out;
    out.id = ex.id;
    out.answer_index = ex.answer_index;
    out.question_ids = encode_question(vocab, ex, cfg.max_source_len);
    for (int i = 0; i < ex.n_options(); ++i) {
        out.option_pair_ids.push_back(encode_option_pair_ids(vocab, ex, i, cfg.max_source_len));
        out.option_text_ids.push_back(vocab.encode(ex.options[static_cast<std::size_t>(i)]));
    }
    out.target_ids = encode_target(vocab, ex.answer_text(), cfg.max_target_len);
    // dataset_name \n Q \n (A) O_1 (B) O_2 ...
    out.vanilla_ids = vocab.encode(ex.dataset_name.empty() ? "mcqa" : ex.dataset_name);
    out.vanilla_ids.push_back(tok::DELIM);
    const std::vector<int> q = vocab.encode(ex.question);
    out.vanilla_ids.insert(out.vanilla_ids.end(), q.begin(), q.end());
    out.vanilla_ids.push_back(tok::DELIM);
    for (int i = 0; i < ex.n_options(); ++i) {
        out.vanilla_ids.push_back(tok::OPTION_A + i);
        const auto& o = out.option_text_ids[static_cast<std::size_t>(i)];
        out.vanilla_ids.insert(out.vanilla_ids.end(), o.begin(), o.end());
    }
    if (static_cast<long>(out.vanilla_ids.size()) > cfg.max_source_len)
        out.vanilla_ids.resize(static_cast<std::size_t>(cfg.max_source_len));
    return out;
}

std::vector<EncodedExample> encode_dataset(const Vocab& vocab, const Dataset& data,
                                           const ModelConfig& cfg) {
    std::vector<EncodedExample> out;
    out.reserve(data.size());
    for (const MCQAExample& ex : data) out.push_back(encode_example(vocab, ex, cfg));
    return out;
}

Tensor sequence_generation_loss(const Backbone& backbone, const Tensor& h_src,
                                const std::vector<int>& target_ids) {
    const long m = static_cast<long>(target_ids.size());
    if (m == 0) throw ValidationError("generation loss: empty target");
    const Tensor logits = backbone.teacher_forced_logits(h_src, target_ids);
    Tensor acc;
    for (long j = 0; j < m; ++j) {
        Tensor step = cross_entropy_from_logits(select_column(logits, j),
                                               target_ids[static_cast<std::size_t>(j)]);
        acc = j == 0 ? step : add(acc, step);
    }
    return scale(acc, 1.0 / static_cast<double>(m));
}

// ---- dual attention -----------------------------------------------------

void DualAttention::init(const ModelConfig& cfg, Rng& rng) {
    d_model = cfg.d_model;
    w_qo = Tensor::randn({cfg.d_model, cfg.d_model}, rng, 0.02);
    b_qo = Tensor::zeros({cfg.d_model}, true);
    w_qc = Tensor::randn({cfg.d_model, cfg.d_model}, rng, 0.02);
    b_qc = Tensor::zeros({cfg.d_model}, true);
    ln_qo.init(cfg.d_model);
    ln_qc.init(cfg.d_model);
}

void DualAttention::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w_qo.weight", w_qo});
    out.push_back({prefix + ".w_qo.bias", b_qo});
    out.push_back({prefix + ".w_qc.weight", w_qc});
    out.push_back({prefix + ".w_qc.bias", b_qc});
    ln_qo.collect(prefix + ".ln_qo", out);
    ln_qc.collect(prefix + ".ln_qc", out);
}

std::pair<Tensor, Tensor> DualAttention::forward(const Tensor& h_qo, const Tensor& h_qc) const {
    if (h_qo.rows() != d_model || h_qc.rows() != d_model)
        throw DimensionError("dual attention: width mismatch, expected " + std::to_string(d_model));
    // affinity between option tokens (rows) and clue tokens (columns)
    const Tensor s = scale(matmul(transpose(h_qo), h_qc), 1.0 / std::sqrt(static_cast<double>(d_model)));
    const Tensor to_qo = softmax(s, 1);             // rows over clue positions
    const Tensor to_qc = softmax(transpose(s), 1);  // rows over option positions
    Tensor fused_qo = ln_qo(add(h_qo, affine(matmul(h_qc, transpose(to_qo)), w_qo, b_qo)));
    Tensor fused_qc = ln_qc(add(h_qc, affine(matmul(h_qo, transpose(to_qc)), w_qc, b_qc)));
    return {fused_qo, fused_qc};
}

// ---- reader MLP -----------------------------------------------------------

void ReaderMlp::init(long d_in, long d_hidden, Rng& rng) {
    w1 = Tensor::randn({d_hidden, d_in}, rng, 0.02);
    b1 = Tensor::zeros({d_hidden}, true);
    w2 = Tensor::randn({1, d_hidden}, rng, 0.02);
    b2 = Tensor::zeros({1}, true);
}

void ReaderMlp::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w1.weight", w1});
    out.push_back({prefix + ".w1.bias", b1});
    out.push_back({prefix + ".w2.weight", w2});
    out.push_back({prefix + ".w2.bias", b2});
}

Tensor ReaderMlp::score(const Tensor& features) const {
    return affine(relu(affine(features, w1, b1)), w2, b2);
}

// ---- GenMC ------------------------------------------------------------------

GenMCModel::GenMCModel(const ModelConfig& cfg, std::uint64_t seed, bool weak_clue)
    : weak_clue_(weak_clue) {
    Rng rng(seed);
    backbone_.init(cfg, rng);
    fusion_.init(cfg, rng);
    dual_.init(cfg, rng);
    reader_.init(2 * cfg.d_model, cfg.d_model, rng);
}

ParamList GenMCModel::parameters() const {
    ParamList out;
    backbone_.collect(out);
    fusion_.collect("fusion", out);
    dual_.collect("dual", out);
    reader_.collect("reader", out);
    return out;
}

ParamList GenMCModel::trainable_parameters() const {
    if (!weak_clue_) return parameters();
    // Weak Clue minimizes the classification loss only; the decoder is not
    // in the optimizer set and stays at initialization.
    ParamList out;
    for (auto& p : parameters())
        if (p.name.rfind("decoder.", 0) != 0) out.push_back(p);
    return out;
}

std::pair<std::vector<int>, Tensor> GenMCModel::generate_clue(
    const std::vector<int>& question_ids) const {
    NoGradGuard no_grad;
    const Tensor h_q = backbone_.encode(question_ids);
    return backbone_.greedy_decode(h_q, backbone_.cfg.max_target_len);
}

ForwardState GenMCModel::forward_state(const EncodedExample& ex,
                                       const std::vector<int>* clue_ids_override,
                                       const Tensor* h_c_override) const {
    ForwardState st;
    st.h_q = backbone_.encode(ex.question_ids);
    if (clue_ids_override) {
        st.clue_ids = *clue_ids_override;
        if (h_c_override) {
            st.h_c = *h_c_override;
        } else if (st.clue_ids.empty()) {
            st.h_c = Tensor::zeros({backbone_.cfg.d_model, 0});
        } else {
            NoGradGuard no_grad;
            st.h_c = backbone_.decode_states(st.clue_ids, st.h_q.detach()).detach();
        }
    } else {
        // free-running greedy decode, identical to inference
        auto decoded = backbone_.greedy_decode(st.h_q, backbone_.cfg.max_target_len);
        st.clue_ids = std::move(decoded.first);
        st.h_c = std::move(decoded.second);
    }
    // the clue representation enters the reader through a graph boundary:
    // the read loss never reaches the decoder
    st.h_qc = fusion_.forward(concat_time(st.h_q, st.h_c.detach()));

    const int n = ex.n_options();
    if (n == 0) throw ValidationError("example " + ex.id + ": no options to score");
    std::vector<Tensor> score_parts;
    for (int i = 0; i < n; ++i) {
        Tensor h_qo = backbone_.encode(ex.option_pair_ids[static_cast<std::size_t>(i)]);
        auto [fused_qo, fused_qc] = dual_.forward(h_qo, st.h_qc);
        Tensor f_qo = max_pool_time(fused_qo);
        Tensor f_qc = max_pool_time(fused_qc);
        score_parts.push_back(reader_.score(concat_rows({f_qo, f_qc})));
        st.h_qo.push_back(std::move(h_qo));
        st.fused_qo.push_back(std::move(fused_qo));
        st.fused_qc.push_back(std::move(fused_qc));
        st.f_qo.push_back(std::move(f_qo));
        st.f_qc.push_back(std::move(f_qc));
    }
    st.scores = concat_rows(score_parts);
    st.predicted = 0;
    for (int i = 1; i < n; ++i)
        if (st.scores.at(i) > st.scores.at(st.predicted)) st.predicted = i;
    return st;
}

LossBundle GenMCModel::loss(const EncodedExample& ex) const {
    const ForwardState st = forward_state(ex);
    LossBundle out;
    // separate teacher-forced decoder pass over the same encoder states
    out.gen_loss = weak_clue_ ? Tensor::scalar(0.0)
                              : sequence_generation_loss(backbone_, st.h_q, ex.target_ids);
    out.read_loss = cross_entropy_from_logits(st.scores, ex.answer_index);
    out.total = add(out.gen_loss, out.read_loss);
    return out;
}

int GenMCModel::predict(const EncodedExample& ex) const {
    NoGradGuard no_grad;
    return forward_state(ex).predicted;
}

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed) {
    switch (kind) {
        case ModelKind::GENMC: return std::make_unique<GenMCModel>(cfg, seed, false);
        case ModelKind::WEAK_CLUE: return std::make_unique<GenMCModel>(cfg, seed, true);
        case ModelKind::T2T_VANILLA: return std::make_unique<T2TVanillaModel>(cfg, seed);
        case ModelKind::T2T_ENC: return std::make_unique<T2TEncModel>(cfg, seed);
        case ModelKind::CLUE_GENERATOR: return std::make_unique<ClueGeneratorModel>(cfg, seed);
        case ModelKind::TOKEN_CLUE: return std::make_unique<TokenClueModel>(cfg, seed);
    }
    throw ContractError("unreachable model kind");
}

}  // namespace genmc
