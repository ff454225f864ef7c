#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "tokens.hpp"

namespace genmc {

// Token table with the reserved ids of tokens.hpp pinned at the front.
// Bijective over non-UNK tokens; stable across save/load.
class Vocab {
public:
    Vocab();

    int add_token(const std::string& token);  // returns existing id if present
    int id_of(const std::string& token) const;  // UNK for unknown
    const std::string& token_of(int id) const;
    long size() const { return static_cast<long>(id_to_token_.size()); }

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

// lowercase + punctuation splitting + whitespace tokenization
std::vector<std::string> tokenize_text(const std::string& text);

struct MCQAExample {
    std::string id;
    std::string question;
    std::vector<std::string> options;
    int answer_index = 0;
    std::string dataset_name;

    int n_options() const { return static_cast<int>(options.size()); }
    const std::string& answer_text() const { return options[static_cast<std::size_t>(answer_index)]; }
    void validate(const std::string& where) const;
};

using Dataset = std::vector<MCQAExample>;

// builds the token table from every text field of the corpus; tokens ordered
// by frequency (desc), ties broken lexicographically, capped at max_tokens
Vocab build_vocab(const Dataset& corpus, long max_tokens = 100000);

// One object per line: {"id", "question", "options": [...], "answer_idx",
// "dataset": optional}. Lines starting with '#' are header comments.
// Errors name the offending line number.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& data, const std::string& path, const std::string& header = "");

struct SynthParams {
    long n_examples = 0;
    long vocab_size = 0;
    long n_options = 0;
    std::uint64_t seed = 0;
    // "", "train", "dev" or "test"; non-empty restricts keys to that share
    // of a deterministic 80/10/10 partition
    std::string split;
};

// Single-hop task: the question names a key token, a seed-fixed bijection
// maps keys to answer tokens, options are answer tokens.
Dataset gen_synth_copy(const SynthParams& p);

// Two-hop task: the question names a key and its intermediate symbol,
// R1: keys -> mids, R2: mids -> two-token answers; the correct option is
// R2(R1(key)) and shares no token with the question. With a split the key
// sets of train/dev/test are disjoint while the mid inventory is shared.
Dataset gen_synth_twohop(const SynthParams& p);

// header comment carrying the generator parameters, written by `synth`
std::string synth_header(const std::string& task, const SynthParams& p);

struct Batch {
    std::vector<MCQAExample> examples;
    // padded to the longest sequence in the batch, after truncation
    std::vector<std::vector<int>> question_ids;   // [B][Lq]
    std::vector<std::vector<bool>> question_mask; // true at non-PAD
    std::vector<std::vector<std::vector<int>>> option_pair_ids;  // [B][n][Lo]
    std::vector<std::vector<std::vector<bool>>> option_pair_mask;
    std::vector<std::vector<int>> target_ids;     // [B][Lt], answer text + EOS
    std::vector<std::vector<bool>> target_mask;
    std::vector<int> answer_index;
};

// question tokens truncated to max_source_len; question + DELIM + option
// truncated to max_source_len; target = answer tokens + EOS truncated to
// max_target_len
std::vector<int> encode_question(const Vocab& v, const MCQAExample& ex, long max_source_len);
std::vector<int> encode_option_pair_ids(const Vocab& v, const MCQAExample& ex, int option,
                                        long max_source_len);
std::vector<int> encode_target(const Vocab& v, const std::string& answer_text,
                               long max_target_len);

// deterministic shuffle by seed, last partial batch kept
std::vector<Batch> batchify(const Dataset& examples, const Vocab& vocab, long batch_size,
                            std::uint64_t shuffle_seed, long max_source_len, long max_target_len);

}  // namespace genmc
