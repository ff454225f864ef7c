#include "data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace genmc {

using nlohmann::json;

// ---- vocab -------------------------------------------------------------

namespace {

const char* kReservedTokens[tok::NUM_RESERVED] = {
    "<pad>", "<bos>", "<eos>", "<unk>", "\\n",
    "(A)", "(B)", "(C)", "(D)", "(E)", "(F)", "(G)", "(H)",
};

}  // namespace

Vocab::Vocab() {
    for (int i = 0; i < tok::NUM_RESERVED; ++i) {
        id_to_token_.emplace_back(kReservedTokens[i]);
        token_to_id_[kReservedTokens[i]] = i;
    }
}

int Vocab::add_token(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_[token] = id;
    return id;
}

int Vocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? tok::UNK : it->second;
}

const std::string& Vocab::token_of(int id) const {
    if (id < 0 || id >= size())
        throw IndexError("vocab: id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& t : tokenize_text(text)) ids.push_back(id_of(t));
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out += ' ';
        out += token_of(id);
    }
    return out;
}

void Vocab::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write vocab file " + path);
    for (const std::string& t : id_to_token_) f << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read vocab file " + path);
    Vocab v;
    std::string line;
    int id = 0;
    while (std::getline(f, line)) {
        if (id < tok::NUM_RESERVED) {
            if (line != kReservedTokens[id])
                throw ValidationError("vocab file " + path + ": reserved id " +
                                      std::to_string(id) + " changed");
        } else {
            v.add_token(line);
        }
        ++id;
    }
    if (id < tok::NUM_RESERVED)
        throw ValidationError("vocab file " + path + ": missing reserved tokens");
    return v;
}

std::vector<std::string> tokenize_text(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char raw : text) {
        const unsigned char uc = static_cast<unsigned char>(raw);
        const char c = static_cast<char>(std::tolower(uc));
        if (std::isspace(uc)) {
            flush();
        } else if (std::isalnum(uc)) {
            cur += c;
        } else {
            // punctuation becomes its own token
            flush();
            out.emplace_back(1, c);
        }
    }
    flush();
    return out;
}

// ---- examples -----------------------------------------------------------

void MCQAExample::validate(const std::string& where) const {
    const int n = n_options();
    if (n < 2 || n > tok::MAX_OPTIONS)
        throw ValidationError(where + ": option count " + std::to_string(n) +
                              " outside [2," + std::to_string(tok::MAX_OPTIONS) + "]");
    if (answer_index < 0 || answer_index >= n)
        throw ValidationError(where + ": answer_idx " + std::to_string(answer_index) +
                              " out of range for " + std::to_string(n) + " options");
    if (question.empty()) throw ValidationError(where + ": empty question");
    for (const std::string& o : options)
        if (o.empty()) throw ValidationError(where + ": empty option text");
}

Vocab build_vocab(const Dataset& corpus, long max_tokens) {
    if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
    std::map<std::string, long> freq;
    auto count = [&](const std::string& text) {
        for (const std::string& t : tokenize_text(text)) ++freq[t];
    };
    for (const MCQAExample& ex : corpus) {
        count(ex.question);
        count(ex.dataset_name);
        for (const std::string& o : ex.options) count(o);
    }
    std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    for (const auto& [token, _] : entries) {
        if (v.size() >= max_tokens) break;
        v.add_token(token);
    }
    return v;
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open dataset file " + path);
    Dataset out;
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
        }
        MCQAExample ex;
        try {
            ex.id = j.at("id").get<std::string>();
            ex.question = j.at("question").get<std::string>();
            ex.options = j.at("options").get<std::vector<std::string>>();
            ex.answer_index = j.at("answer_idx").get<int>();
            ex.dataset_name = j.value("dataset", std::string());
        } catch (const json::exception& e) {
            throw ValidationError(where + ": bad record (" + e.what() + ")");
        }
        ex.validate(where);
        out.push_back(std::move(ex));
    }
    return out;
}

void save_jsonl(const Dataset& data, const std::string& path, const std::string& header) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write dataset file " + path);
    if (!header.empty()) f << "# " << header << '\n';
    for (const MCQAExample& ex : data) {
        json j;
        j["id"] = ex.id;
        j["question"] = ex.question;
        j["options"] = ex.options;
        j["answer_idx"] = ex.answer_index;
        if (!ex.dataset_name.empty()) j["dataset"] = ex.dataset_name;
        f << j.dump() << '\n';
    }
}

// ---- synthetic tasks -------------------------------------------------------

namespace {

void check_synth_params(const SynthParams& p) {
    if (p.n_examples <= 0 || p.vocab_size <= 0 || p.n_options <= 0)
        throw ValidationError("synth: n_examples, vocab_size and n_options must be positive");
    if (p.n_options < 2 || p.n_options > tok::MAX_OPTIONS)
        throw ValidationError("synth: n_options must be in [2," +
                              std::to_string(tok::MAX_OPTIONS) + "]");
    if (!p.split.empty() && p.split != "train" && p.split != "dev" && p.split != "test")
        throw ValidationError("synth: split must be train, dev or test");
}

// deterministic 80/10/10 partition of [0, n); returns the requested share
std::vector<long> split_members(long n, std::uint64_t seed, const std::string& split) {
    std::vector<long> ids(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    if (split.empty()) return ids;
    Rng rng = Rng(seed).fork(0xA11);
    rng.shuffle(ids);
    const long n_test = std::max<long>(1, n / 10);
    const long n_dev = std::max<long>(1, n / 10);
    const long n_train = n - n_dev - n_test;
    if (n_train < 1) throw ValidationError("synth: vocab too small for a key split");
    if (split == "train") return {ids.begin(), ids.begin() + n_train};
    if (split == "dev") return {ids.begin() + n_train, ids.begin() + n_train + n_dev};
    return {ids.begin() + n_train + n_dev, ids.end()};
}

std::uint64_t split_salt(const std::string& split) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : split) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    return h;
}

// n distinct draws from [0, pool) excluding `taken`
std::vector<long> sample_distinct(Rng& rng, long pool, long n, long taken) {
    std::vector<long> out;
    while (static_cast<long>(out.size()) < n) {
        const long v = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(pool)));
        if (v == taken) continue;
        if (std::find(out.begin(), out.end(), v) != out.end()) continue;
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::string synth_header(const std::string& task, const SynthParams& p) {
    std::ostringstream os;
    os << "genmc-synth task=" << task << " n=" << p.n_examples << " options=" << p.n_options
       << " vocab=" << p.vocab_size << " seed=" << p.seed;
    if (!p.split.empty()) os << " split=" << p.split;
    return os.str();
}

Dataset gen_synth_copy(const SynthParams& p) {
    check_synth_params(p);
    // budget: keys + answers + 4 template words within vocab_size symbols
    const long n_keys = (p.vocab_size - 4) / 2;
    const long n_answers = n_keys;
    if (n_keys < 4)
        throw ValidationError("synth-copy: vocab_size " + std::to_string(p.vocab_size) +
                              " too small for disjoint key/answer ranges");
    if (p.n_options > n_answers)
        throw ValidationError("synth-copy: n_options exceeds the answer inventory");
    // fixed random bijection key -> answer
    std::vector<long> perm(static_cast<std::size_t>(n_keys));
    for (long i = 0; i < n_keys; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng(p.seed).fork(0xB13).shuffle(perm);
    const std::vector<long> keys = split_members(n_keys, p.seed, p.split);

    Rng rng = Rng(p.seed).fork(split_salt(p.split));
    Dataset out;
    out.reserve(static_cast<std::size_t>(p.n_examples));
    for (long i = 0; i < p.n_examples; ++i) {
        const long key = keys[rng.next_below(keys.size())];
        const long gold = perm[static_cast<std::size_t>(key)];
        const std::vector<long> distractors = sample_distinct(rng, n_answers, p.n_options - 1, gold);
        const long gold_pos = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(p.n_options)));
        MCQAExample ex;
        ex.id = "copy-" + std::to_string(i);
        ex.dataset_name = "synth-copy";
        ex.question = "what pairs with k" + std::to_string(key) + " ?";
        long d = 0;
        for (long pos = 0; pos < p.n_options; ++pos) {
            const long a = pos == gold_pos ? gold : distractors[static_cast<std::size_t>(d++)];
            ex.options.push_back("a" + std::to_string(a));
        }
        ex.answer_index = static_cast<int>(gold_pos);
        out.push_back(std::move(ex));
    }
    return out;
}

Dataset gen_synth_twohop(const SynthParams& p) {
    check_synth_params(p);
    // budget: keys + mids + answer prefixes/suffixes + 4 template words,
    // all in disjoint ranges within vocab_size symbols
    const long n_mids = std::max<long>(4, p.vocab_size / 8);
    long side = 1;
    while (side * side < n_mids) ++side;  // prefix/suffix pools of size `side`
    const long n_keys = p.vocab_size - 4 - n_mids - 2 * side;
    if (n_keys < 8)
        throw ValidationError("synth-twohop: vocab_size " + std::to_string(p.vocab_size) +
                              " too small for disjoint token ranges");
    if (p.n_options > n_mids)
        throw ValidationError("synth-twohop: n_options exceeds the mid inventory");

    // R2: mids -> distinct (prefix, suffix) answer pairs
    std::vector<long> pair_ids(static_cast<std::size_t>(side * side));
    for (long i = 0; i < side * side; ++i) pair_ids[static_cast<std::size_t>(i)] = i;
    Rng(p.seed).fork(0xC17).shuffle(pair_ids);
    auto answer_of_mid = [&](long mid) {
        const long pr = pair_ids[static_cast<std::size_t>(mid)] / side;
        const long sf = pair_ids[static_cast<std::size_t>(mid)] % side;
        return "x" + std::to_string(pr) + " y" + std::to_string(sf);
    };

    // R1: keys -> mids, balanced so every mid keeps keys in every split
    std::vector<long> key_order(static_cast<std::size_t>(n_keys));
    for (long i = 0; i < n_keys; ++i) key_order[static_cast<std::size_t>(i)] = i;
    Rng(p.seed).fork(0xD19).shuffle(key_order);
    std::vector<long> mid_of_key(static_cast<std::size_t>(n_keys));
    for (long i = 0; i < n_keys; ++i)
        mid_of_key[static_cast<std::size_t>(key_order[static_cast<std::size_t>(i)])] = i % n_mids;

    const std::vector<long> keys = split_members(n_keys, p.seed, p.split);

    Rng rng = Rng(p.seed).fork(split_salt(p.split) ^ 0x77);
    Dataset out;
    out.reserve(static_cast<std::size_t>(p.n_examples));
    for (long i = 0; i < p.n_examples; ++i) {
        const long key = keys[rng.next_below(keys.size())];
        const long mid = mid_of_key[static_cast<std::size_t>(key)];
        const std::vector<long> other = sample_distinct(rng, n_mids, p.n_options - 1, mid);
        const long gold_pos = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(p.n_options)));
        MCQAExample ex;
        ex.id = "twohop-" + std::to_string(i);
        ex.dataset_name = "synth-twohop";
        ex.question = "which goes with k" + std::to_string(key) + " m" + std::to_string(mid) + " ?";
        long d = 0;
        for (long pos = 0; pos < p.n_options; ++pos) {
            const long m = pos == gold_pos ? mid : other[static_cast<std::size_t>(d++)];
            ex.options.push_back(answer_of_mid(m));
        }
        ex.answer_index = static_cast<int>(gold_pos);
        out.push_back(std::move(ex));
    }
    return out;
}

// ---- encoding and batching ---------------------------------------------------

std::vector<int> encode_question(const Vocab& v, const MCQAExample& ex, long max_source_len) {
    std::vector<int> ids = v.encode(ex.question);
    if (static_cast<long>(ids.size()) > max_source_len) ids.resize(static_cast<std::size_t>(max_source_len));
    if (ids.empty()) throw ValidationError("example " + ex.id + ": question tokenizes to nothing");
    return ids;
}

std::vector<int> encode_option_pair_ids(const Vocab& v, const MCQAExample& ex, int option,
                                        long max_source_len) {
    const std::string& text = ex.options[static_cast<std::size_t>(option)];
    std::vector<int> opt = v.encode(text);
    if (opt.empty()) throw ValidationError("example " + ex.id + ": option tokenizes to nothing");
    std::vector<int> ids = v.encode(ex.question);
    ids.push_back(tok::DELIM);
    ids.insert(ids.end(), opt.begin(), opt.end());
    if (static_cast<long>(ids.size()) > max_source_len) ids.resize(static_cast<std::size_t>(max_source_len));
    return ids;
}

std::vector<int> encode_target(const Vocab& v, const std::string& answer_text,
                               long max_target_len) {
    std::vector<int> ids = v.encode(answer_text);
    if (ids.empty()) throw ValidationError("target answer tokenizes to nothing");
    if (static_cast<long>(ids.size()) > max_target_len - 1)
        ids.resize(static_cast<std::size_t>(max_target_len - 1));
    ids.push_back(tok::EOS);
    return ids;
}

namespace {

void pad_block(std::vector<std::vector<int>>& ids, std::vector<std::vector<bool>>& mask) {
    std::size_t longest = 0;
    for (const auto& row : ids) longest = std::max(longest, row.size());
    mask.clear();
    for (auto& row : ids) {
        std::vector<bool> m(row.size(), true);
        row.resize(longest, tok::PAD);
        m.resize(longest, false);
        mask.push_back(std::move(m));
    }
}

}  // namespace

std::vector<Batch> batchify(const Dataset& examples, const Vocab& vocab, long batch_size,
                            std::uint64_t shuffle_seed, long max_source_len, long max_target_len) {
    if (batch_size <= 0) throw ValidationError("batchify: batch_size must be positive");
    std::vector<long> order(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) order[i] = static_cast<long>(i);
    Rng rng(shuffle_seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        Batch b;
        for (std::size_t k = start; k < end; ++k) {
            const MCQAExample& ex = examples[static_cast<std::size_t>(order[k])];
            b.examples.push_back(ex);
            b.question_ids.push_back(encode_question(vocab, ex, max_source_len));
            std::vector<std::vector<int>> pairs;
            for (int o = 0; o < ex.n_options(); ++o)
                pairs.push_back(encode_option_pair_ids(vocab, ex, o, max_source_len));
            b.option_pair_ids.push_back(std::move(pairs));
            b.target_ids.push_back(encode_target(vocab, ex.answer_text(), max_target_len));
            b.answer_index.push_back(ex.answer_index);
        }
        pad_block(b.question_ids, b.question_mask);
        pad_block(b.target_ids, b.target_mask);
        b.option_pair_mask.resize(b.option_pair_ids.size());
        for (std::size_t i = 0; i < b.option_pair_ids.size(); ++i)
            pad_block(b.option_pair_ids[i], b.option_pair_mask[i]);
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace genmc
