#include "baselines.hpp"

namespace genmc {

// ---- Text2Text vanilla ----------------------------------------------------

T2TVanillaModel::T2TVanillaModel(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    backbone_.init(cfg, rng);
}

ParamList T2TVanillaModel::parameters() const {
    ParamList out;
    backbone_.collect(out);
    return out;
}

LossBundle T2TVanillaModel::loss(const EncodedExample& ex) const {
    const Tensor h_src = backbone_.encode(ex.vanilla_ids);
    const std::vector<int> target = {tok::OPTION_A + ex.answer_index, tok::EOS};
    LossBundle out;
    out.gen_loss = sequence_generation_loss(backbone_, h_src, target);
    out.read_loss = Tensor::scalar(0.0);
    out.total = add(out.gen_loss, out.read_loss);
    return out;
}

int T2TVanillaModel::predict(const EncodedExample& ex) const {
    NoGradGuard no_grad;
    const Tensor h_src = backbone_.encode(ex.vanilla_ids);
    // step-1 distribution conditions only on BOS; the dummy target never
    // enters the input
    const Tensor logits = backbone_.teacher_forced_logits(h_src, {tok::EOS});
    int best = 0;
    for (int i = 1; i < ex.n_options(); ++i)
        if (logits.at(tok::OPTION_A + i, 0) > logits.at(tok::OPTION_A + best, 0)) best = i;
    return best;
}

// ---- Text2Text encoder-only --------------------------------------------------

T2TEncModel::T2TEncModel(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    backbone_.init(cfg, rng);
    scorer_.init(cfg.d_model, cfg.d_model, rng);
}

ParamList T2TEncModel::parameters() const {
    ParamList out;
    backbone_.collect(out);
    scorer_.collect("scorer", out);
    return out;
}

Tensor T2TEncModel::score_pairs(const std::vector<std::vector<int>>& pair_ids) const {
    if (pair_ids.empty()) throw ValidationError("t2t-enc: no options to score");
    std::vector<Tensor> parts;
    for (const auto& ids : pair_ids)
        parts.push_back(scorer_.score(max_pool_time(backbone_.encode(ids))));
    return concat_rows(parts);
}

LossBundle T2TEncModel::loss(const EncodedExample& ex) const {
    LossBundle out;
    out.gen_loss = Tensor::scalar(0.0);
    out.read_loss = cross_entropy_from_logits(score_pairs(ex.option_pair_ids), ex.answer_index);
    out.total = add(out.gen_loss, out.read_loss);
    return out;
}

int T2TEncModel::predict(const EncodedExample& ex) const {
    NoGradGuard no_grad;
    const Tensor s = score_pairs(ex.option_pair_ids);
    int best = 0;
    for (int i = 1; i < ex.n_options(); ++i)
        if (s.at(i) > s.at(best)) best = i;
    return best;
}

// ---- stage-1 clue generator ---------------------------------------------------

ClueGeneratorModel::ClueGeneratorModel(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    backbone_.init(cfg, rng);
}

ParamList ClueGeneratorModel::parameters() const {
    ParamList out;
    backbone_.collect(out);
    return out;
}

LossBundle ClueGeneratorModel::loss(const EncodedExample& ex) const {
    const Tensor h_src = backbone_.encode(ex.question_ids);
    LossBundle out;
    out.gen_loss = sequence_generation_loss(backbone_, h_src, ex.target_ids);
    out.read_loss = Tensor::scalar(0.0);
    out.total = add(out.gen_loss, out.read_loss);
    return out;
}

std::vector<int> ClueGeneratorModel::decode_clue(const std::vector<int>& question_ids) const {
    NoGradGuard no_grad;
    return backbone_.greedy_decode(backbone_.encode(question_ids), backbone_.cfg.max_target_len)
        .first;
}

int ClueGeneratorModel::predict(const EncodedExample& ex) const {
    const std::vector<int> clue = decode_clue(ex.question_ids);
    for (int i = 0; i < ex.n_options(); ++i)
        if (clue == ex.option_text_ids[static_cast<std::size_t>(i)]) return i;
    return -1;  // no option matches the decode exactly
}

// ---- token clue pipeline -------------------------------------------------------

std::vector<int> token_clue_pair_ids(const EncodedExample& ex, int option,
                                     const std::vector<int>& clue_ids, long max_source_len) {
    std::vector<int> ids = ex.question_ids;
    ids.push_back(tok::DELIM);
    if (!clue_ids.empty()) {
        ids.insert(ids.end(), clue_ids.begin(), clue_ids.end());
        ids.push_back(tok::DELIM);
    }
    const auto& opt = ex.option_text_ids[static_cast<std::size_t>(option)];
    ids.insert(ids.end(), opt.begin(), opt.end());
    if (static_cast<long>(ids.size()) > max_source_len)
        ids.resize(static_cast<std::size_t>(max_source_len));
    return ids;
}

TokenClueModel::TokenClueModel(const ModelConfig& cfg, std::uint64_t seed)
    : generator_(std::make_unique<ClueGeneratorModel>(cfg, seed)),
      reader_(std::make_unique<T2TEncModel>(cfg, seed ^ 0x5747C1F0ULL)) {}

TokenClueModel::TokenClueModel(std::unique_ptr<ClueGeneratorModel> generator,
                               std::unique_ptr<T2TEncModel> reader)
    : generator_(std::move(generator)), reader_(std::move(reader)) {
    if (!generator_ || !reader_)
        throw ContractError("token-clue: both pipeline stages are required");
}

ParamList TokenClueModel::parameters() const {
    ParamList out;
    for (auto& p : generator_->parameters()) out.push_back({"stage1." + p.name, p.tensor});
    for (auto& p : reader_->parameters()) out.push_back({"stage2." + p.name, p.tensor});
    return out;
}

LossBundle TokenClueModel::loss(const EncodedExample& ex) const {
    const std::vector<int> clue = generator_->decode_clue(ex.question_ids);
    std::vector<std::vector<int>> pairs;
    for (int i = 0; i < ex.n_options(); ++i)
        pairs.push_back(token_clue_pair_ids(ex, i, clue, config().max_source_len));
    LossBundle out;
    out.gen_loss = Tensor::scalar(0.0);
    out.read_loss = cross_entropy_from_logits(reader_->score_pairs(pairs), ex.answer_index);
    out.total = add(out.gen_loss, out.read_loss);
    return out;
}

int TokenClueModel::predict(const EncodedExample& ex) const {
    NoGradGuard no_grad;
    const std::vector<int> clue = generator_->decode_clue(ex.question_ids);
    std::vector<std::vector<int>> pairs;
    for (int i = 0; i < ex.n_options(); ++i)
        pairs.push_back(token_clue_pair_ids(ex, i, clue, config().max_source_len));
    const Tensor s = reader_->score_pairs(pairs);
    int best = 0;
    for (int i = 1; i < ex.n_options(); ++i)
        if (s.at(i) > s.at(best)) best = i;
    return best;
}

}  // namespace genmc
