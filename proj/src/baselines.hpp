#pragma once

#include "model.hpp"

namespace genmc {

// Text-to-text use of the backbone: the question and every option (each
// preceded by its "(A)".."(H)" id token) form one encoder input and the
// decoder is trained to emit the correct option id, then EOS. Prediction
// restricts the step-1 argmax to the n id tokens, so even an untrained
// model names a valid option.
class T2TVanillaModel : public Model {
public:
    T2TVanillaModel(const ModelConfig& cfg, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::T2T_VANILLA; }
    const ModelConfig& config() const override { return backbone_.cfg; }
    ParamList parameters() const override;
    LossBundle loss(const EncodedExample& ex) const override;
    int predict(const EncodedExample& ex) const override;

    Backbone& backbone() { return backbone_; }

private:
    Backbone backbone_;
};

// Encoder-only use of the backbone: each question-option pair is encoded,
// max-pooled and scored by a two-layer MLP; the decoder is never touched.
class T2TEncModel : public Model {
public:
    T2TEncModel(const ModelConfig& cfg, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::T2T_ENC; }
    const ModelConfig& config() const override { return backbone_.cfg; }
    ParamList parameters() const override;
    LossBundle loss(const EncodedExample& ex) const override;
    int predict(const EncodedExample& ex) const override;

    // scores for arbitrary per-option inputs; shared with the token-clue
    // reader which inserts decoded clue tokens into the pairs
    Tensor score_pairs(const std::vector<std::vector<int>>& pair_ids) const;

    Backbone& backbone() { return backbone_; }

private:
    Backbone backbone_;
    ReaderMlp scorer_;
};

// Stage 1 of the token-clue pipeline: the backbone trained as a pure
// question-to-answer generator. predict() reports the option whose text
// exactly matches the greedy decode, so dev accuracy doubles as an
// exact-match metric for early stopping.
class ClueGeneratorModel : public Model {
public:
    ClueGeneratorModel(const ModelConfig& cfg, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::CLUE_GENERATOR; }
    const ModelConfig& config() const override { return backbone_.cfg; }
    ParamList parameters() const override;
    LossBundle loss(const EncodedExample& ex) const override;
    int predict(const EncodedExample& ex) const override;

    std::vector<int> decode_clue(const std::vector<int>& question_ids) const;

    Backbone& backbone() { return backbone_; }

private:
    Backbone backbone_;
};

// Q + "\n" + C + "\n" + O_i (the clue delimiter pair collapses when the
// clue is empty, leaving the plain t2t-enc pairing)
std::vector<int> token_clue_pair_ids(const EncodedExample& ex, int option,
                                     const std::vector<int>& clue_ids, long max_source_len);

// Two separately trained checkpoints interacting only at the token level:
// a frozen stage-1 generator decodes a clue, a fresh stage-2 encoder+MLP
// scores the clue-augmented pairs.
class TokenClueModel : public Model {
public:
    TokenClueModel(const ModelConfig& cfg, std::uint64_t seed);
    TokenClueModel(std::unique_ptr<ClueGeneratorModel> generator,
                   std::unique_ptr<T2TEncModel> reader);

    ModelKind kind() const override { return ModelKind::TOKEN_CLUE; }
    const ModelConfig& config() const override { return reader_->config(); }
    ParamList parameters() const override;
    // only the stage-2 reader trains through this interface
    ParamList trainable_parameters() const override { return reader_->parameters(); }
    LossBundle loss(const EncodedExample& ex) const override;
    int predict(const EncodedExample& ex) const override;

    ClueGeneratorModel& generator() { return *generator_; }
    T2TEncModel& reader() { return *reader_; }
    const ClueGeneratorModel& generator() const { return *generator_; }
    const T2TEncModel& reader() const { return *reader_; }

private:
    std::unique_ptr<ClueGeneratorModel> generator_;
    std::unique_ptr<T2TEncModel> reader_;
};

}  // namespace genmc
