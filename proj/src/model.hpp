#pragma once

#include <memory>
#include <string>
#include <vector>

#include "data.hpp"
#include "transformer.hpp"

namespace genmc {

enum class ModelKind { GENMC, T2T_VANILLA, T2T_ENC, WEAK_CLUE, TOKEN_CLUE, CLUE_GENERATOR };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

// Example pre-encoded against a vocabulary; models work purely in id space.
struct EncodedExample {
    std::string id;
    std::vector<int> question_ids;                   // truncated to max_source_len
    std::vector<std::vector<int>> option_pair_ids;   // Q + DELIM + O_i, truncated
    std::vector<std::vector<int>> option_text_ids;   // option text alone, no EOS
    std::vector<int> target_ids;                     // answer text + EOS
    std::vector<int> vanilla_ids;                    // name \n Q \n (A) O_1 (B) O_2 ...
    int answer_index = 0;

    int n_options() const { return static_cast<int>(option_pair_ids.size()); }
};

EncodedExample encode_example(const Vocab& vocab, const MCQAExample& ex, const ModelConfig& cfg);
std::vector<EncodedExample> encode_dataset(const Vocab& vocab, const Dataset& data,
                                           const ModelConfig& cfg);

struct LossBundle {
    Tensor gen_loss;   // scalar, >= 0
    Tensor read_loss;  // scalar, >= 0
    Tensor total;      // gen + read
};

// Everything the training loop and the evaluators need from a model.
class Model {
public:
    virtual ~Model() = default;
    virtual ModelKind kind() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual ParamList parameters() const = 0;
    // subset actually updated by the optimizer (Weak Clue leaves the
    // decoder out; Token Clue's stage-1 checkpoint is frozen)
    virtual ParamList trainable_parameters() const { return parameters(); }
    virtual LossBundle loss(const EncodedExample& ex) const = 0;
    virtual int predict(const EncodedExample& ex) const = 0;
};

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed);

// mean per-token cross-entropy of teacher-forced logits, Eq.-style loss used
// by GenMC, the text-to-text baseline and the stage-1 generator
Tensor sequence_generation_loss(const Backbone& backbone, const Tensor& h_src,
                                const std::vector<int>& target_ids);

// Symmetric scaled-dot-product cross-attention with residual + layer norm,
// separate projections per direction.
struct DualAttention {
    long d_model = 0;
    Tensor w_qo, b_qo;  // context added to the option side
    Tensor w_qc, b_qc;  // context added to the clue side
    LayerNormParams ln_qo, ln_qc;

    void init(const ModelConfig& cfg, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    std::pair<Tensor, Tensor> forward(const Tensor& h_qo, const Tensor& h_qc) const;
};

// two-layer scoring head: 2d -> d -> 1
struct ReaderMlp {
    Tensor w1, b1, w2, b2;
    void init(long d_in, long d_hidden, Rng& rng);
    void collect(const std::string& prefix, ParamList& out) const;
    Tensor score(const Tensor& features) const;  // [1]
};

// Intermediate representations of one GenMC forward pass.
struct ForwardState {
    Tensor h_q;                    // [d, |Q|]
    std::vector<int> clue_ids;     // C, possibly empty
    Tensor h_c;                    // [d, |C|], no history (greedy decode)
    Tensor h_qc;                   // [d, |Q|+|C|]
    std::vector<Tensor> h_qo;      // per option [d, L_i]
    std::vector<Tensor> fused_qo;  // per option, same shapes as h_qo
    std::vector<Tensor> fused_qc;  // per option, same shape as h_qc
    std::vector<Tensor> f_qo;      // pooled [d]
    std::vector<Tensor> f_qc;      // pooled [d]
    Tensor scores;                 // [n]
    int predicted = 0;             // argmax of scores, ties to the lowest index
};

// The full model: clue generator over the shared backbone, fusion layer,
// dual-attention reader, two-layer scoring MLP. `weak_clue` keeps the same
// architecture but trains with the classification loss only and leaves the
// decoder untouched.
class GenMCModel : public Model {
public:
    GenMCModel(const ModelConfig& cfg, std::uint64_t seed, bool weak_clue = false);

    ModelKind kind() const override { return weak_clue_ ? ModelKind::WEAK_CLUE : ModelKind::GENMC; }
    const ModelConfig& config() const override { return backbone_.cfg; }
    ParamList parameters() const override;
    ParamList trainable_parameters() const override;
    LossBundle loss(const EncodedExample& ex) const override;
    int predict(const EncodedExample& ex) const override;

    // clue_ids/h_c may be pinned, e.g. to freeze the clue while probing
    // gradients or to force a specific decode in tests
    ForwardState forward_state(const EncodedExample& ex,
                               const std::vector<int>* clue_ids_override = nullptr,
                               const Tensor* h_c_override = nullptr) const;

    std::pair<std::vector<int>, Tensor> generate_clue(const std::vector<int>& question_ids) const;

    Backbone& backbone() { return backbone_; }
    const Backbone& backbone() const { return backbone_; }

private:
    Backbone backbone_;
    EncoderLayer fusion_;
    DualAttention dual_;
    ReaderMlp reader_;
    bool weak_clue_;
};

}  // namespace genmc
