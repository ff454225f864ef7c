#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "data.hpp"

using namespace genmc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "genmc-tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
    auto toks = tokenize_text("Don't STOP here.");
    CHECK(toks == std::vector<std::string>{"don", "'", "t", "stop", "here", "."});
    CHECK(tokenize_text("  ").empty());
}

TEST_CASE("vocab assigns deterministic ids, frequency first") {
    Dataset corpus;
    MCQAExample ex;
    ex.id = "1";
    ex.question = "a b a";
    ex.options = {"c", "c"};
    ex.answer_index = 0;
    corpus.push_back(ex);
    Vocab v = build_vocab(corpus);
    // 'a' and 'c' both occur twice; tie broken lexicographically
    CHECK(v.id_of("a") == tok::NUM_RESERVED);
    CHECK(v.id_of("c") == tok::NUM_RESERVED + 1);
    CHECK(v.id_of("b") == tok::NUM_RESERVED + 2);

    // round trip on in-vocab text, unknown token maps to UNK
    CHECK(v.decode(v.encode("a b c")) == "a b c");
    CHECK(v.encode("zebra") == std::vector<int>{tok::UNK});

    CHECK_THROWS_AS(build_vocab({}), ValidationError);
}

TEST_CASE("vocab save/load keeps ids stable") {
    Dataset corpus;
    MCQAExample ex;
    ex.id = "1";
    ex.question = "red green blue";
    ex.options = {"red", "blue"};
    ex.answer_index = 1;
    corpus.push_back(ex);
    Vocab v = build_vocab(corpus);
    auto path = temp_file("vocab.txt");
    v.save(path.string());
    Vocab loaded = Vocab::load(path.string());
    CHECK(loaded.size() == v.size());
    CHECK(loaded.id_of("green") == v.id_of("green"));
    CHECK(loaded.token_of(tok::DELIM) == "\\n");
}

TEST_CASE("jsonl loading accepts the Table-1 shapes") {
    auto path = temp_file("ok.jsonl");
    write_file(path,
               "# header comment with generator parameters\n"
               R"({"id":"q1","question":"pick one","options":["a","b","c","d","e"],"answer_idx":4,"dataset":"csqa"})"
               "\n"
               R"({"id":"q2","question":"pick again","options":["a","b","c","d","e","f","g","h"],"answer_idx":0})"
               "\n");
    Dataset d = load_jsonl(path.string());
    REQUIRE(d.size() == 2);
    CHECK(d[0].n_options() == 5);
    CHECK(d[0].answer_index == 4);
    CHECK(d[0].dataset_name == "csqa");
    CHECK(d[1].n_options() == 8);
}

TEST_CASE("jsonl loader rejects malformed lines naming the line number") {
    auto bad_idx = temp_file("bad_idx.jsonl");
    write_file(bad_idx,
               R"({"id":"q1","question":"x","options":["a","b"],"answer_idx":2})"
               "\n");
    CHECK_THROWS_WITH_AS(load_jsonl(bad_idx.string()), doctest::Contains(":1:"), ValidationError);

    auto bad_json = temp_file("bad_json.jsonl");
    write_file(bad_json,
               R"({"id":"q1","question":"x","options":["a","b"],"answer_idx":0})"
               "\n{not json\n");
    CHECK_THROWS_WITH_AS(load_jsonl(bad_json.string()), doctest::Contains(":2:"), ValidationError);

    auto empty_opt = temp_file("empty_opt.jsonl");
    write_file(empty_opt,
               R"({"id":"q1","question":"x","options":["a",""],"answer_idx":0})"
               "\n");
    CHECK_THROWS_AS(load_jsonl(empty_opt.string()), ValidationError);

    auto one_opt = temp_file("one_opt.jsonl");
    write_file(one_opt,
               R"({"id":"q1","question":"x","options":["a"],"answer_idx":0})"
               "\n");
    CHECK_THROWS_AS(load_jsonl(one_opt.string()), ValidationError);

    CHECK_THROWS_AS(load_jsonl("/nonexistent/file.jsonl"), IoError);
}

TEST_CASE("jsonl round trip") {
    SynthParams p{.n_examples = 20, .vocab_size = 64, .n_options = 4, .seed = 9};
    Dataset d = gen_synth_copy(p);
    auto path = temp_file("roundtrip.jsonl");
    save_jsonl(d, path.string(), synth_header("copy", p));
    Dataset back = load_jsonl(path.string());
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].id == d[i].id);
        CHECK(back[i].question == d[i].question);
        CHECK(back[i].options == d[i].options);
        CHECK(back[i].answer_index == d[i].answer_index);
    }
}

TEST_CASE("synth copy is a pure function of parameters and seed") {
    SynthParams p{.n_examples = 50, .vocab_size = 100, .n_options = 4, .seed = 42};
    Dataset a = gen_synth_copy(p);
    Dataset b = gen_synth_copy(p);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].question == b[i].question);
        CHECK(a[i].options == b[i].options);
        CHECK(a[i].answer_index == b[i].answer_index);
    }
    Dataset c = gen_synth_copy({.n_examples = 50, .vocab_size = 100, .n_options = 4, .seed = 43});
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].question != c[i].question || a[i].options != c[i].options) differs = true;
    CHECK(differs);
}

TEST_CASE("synth copy options are distinct within each example") {
    Dataset d = gen_synth_copy({.n_examples = 200, .vocab_size = 64, .n_options = 5, .seed = 7});
    for (const auto& ex : d) {
        for (std::size_t i = 0; i < ex.options.size(); ++i)
            for (std::size_t j = i + 1; j < ex.options.size(); ++j)
                CHECK(ex.options[i] != ex.options[j]);
    }
}

TEST_CASE("synth copy answer position is uniform (chi-square at 1%)") {
    Dataset d = gen_synth_copy({.n_examples = 10000, .vocab_size = 128, .n_options = 4, .seed = 1});
    std::vector<long> counts(4, 0);
    for (const auto& ex : d) ++counts[static_cast<std::size_t>(ex.answer_index)];
    const double expected = 10000.0 / 4.0;
    double chi2 = 0.0;
    for (long c : counts) {
        const double diff = static_cast<double>(c) - expected;
        chi2 += diff * diff / expected;
    }
    // dof = 3, critical value at the 1% level
    CHECK(chi2 < 11.345);
}

TEST_CASE("synth copy rejects impossible parameter combinations") {
    CHECK_THROWS_AS(gen_synth_copy({.n_examples = 5, .vocab_size = 10, .n_options = 8, .seed = 1}),
                    ValidationError);
    CHECK_THROWS_AS(gen_synth_copy({.n_examples = 0, .vocab_size = 64, .n_options = 4, .seed = 1}),
                    ValidationError);
}

TEST_CASE("synth twohop: determinism and zero question/answer overlap") {
    SynthParams p{.n_examples = 100, .vocab_size = 256, .n_options = 4, .seed = 5};
    Dataset a = gen_synth_twohop(p);
    Dataset b = gen_synth_twohop(p);
    REQUIRE(a.size() == 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].question == b[i].question);
        CHECK(a[i].options == b[i].options);
    }
    for (const auto& ex : a) {
        auto q_tokens = tokenize_text(ex.question);
        auto a_tokens = tokenize_text(ex.answer_text());
        CHECK(a_tokens.size() == 2);
        for (const auto& qt : q_tokens)
            for (const auto& at : a_tokens) CHECK(qt != at);
    }
}

TEST_CASE("synth twohop split keeps key sets disjoint") {
    auto keys_of = [](const Dataset& d) {
        std::vector<std::string> keys;
        for (const auto& ex : d) {
            for (const auto& t : tokenize_text(ex.question))
                if (t[0] == 'k' && t.size() > 1) keys.push_back(t);
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        return keys;
    };
    SynthParams base{.n_examples = 300, .vocab_size = 256, .n_options = 4, .seed = 3};
    SynthParams ptrain = base, ptest = base;
    ptrain.split = "train";
    ptest.split = "test";
    auto train_keys = keys_of(gen_synth_twohop(ptrain));
    auto test_keys = keys_of(gen_synth_twohop(ptest));
    CHECK(!train_keys.empty());
    CHECK(!test_keys.empty());
    for (const auto& k : test_keys)
        CHECK(std::find(train_keys.begin(), train_keys.end(), k) == train_keys.end());
}

TEST_CASE("synth twohop rejects a too-small vocabulary") {
    CHECK_THROWS_AS(gen_synth_twohop({.n_examples = 5, .vocab_size = 12, .n_options = 4, .seed = 1}),
                    ValidationError);
}

TEST_CASE("target encoding appends EOS and truncates") {
    Dataset corpus = gen_synth_copy({.n_examples = 10, .vocab_size = 64, .n_options = 4, .seed = 2});
    Vocab v = build_vocab(corpus);
    std::vector<int> t = encode_target(v, corpus[0].answer_text(), 32);
    REQUIRE(t.size() == 2);
    CHECK(t.back() == tok::EOS);

    std::string long_answer;
    for (int i = 0; i < 50; ++i) long_answer += corpus[0].answer_text() + " ";
    std::vector<int> trunc = encode_target(v, long_answer, 8);
    CHECK(trunc.size() == 8);
    CHECK(trunc.back() == tok::EOS);
}

TEST_CASE("batchify: sizes, determinism, truncation and masks") {
    Dataset d = gen_synth_copy({.n_examples = 10, .vocab_size = 64, .n_options = 4, .seed = 11});
    // make one question overlong: 100 tokens
    std::string long_q;
    for (int i = 0; i < 100; ++i) long_q += "w ";
    d[3].question = long_q;
    Vocab v = build_vocab(d);

    auto batches = batchify(d, v, 8, 77, 64, 32);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].examples.size() == 8);
    CHECK(batches[1].examples.size() == 2);

    auto again = batchify(d, v, 8, 77, 64, 32);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < batches[i].examples.size(); ++j)
            CHECK(batches[i].examples[j].id == again[i].examples[j].id);

    bool saw_long = false;
    for (const auto& b : batches)
        for (std::size_t j = 0; j < b.examples.size(); ++j) {
            // mask true exactly at non-PAD positions
            for (std::size_t k = 0; k < b.question_ids[j].size(); ++k)
                CHECK(b.question_mask[j][k] == (b.question_ids[j][k] != tok::PAD));
            long n_real = 0;
            for (bool m : b.question_mask[j])
                if (m) ++n_real;
            if (b.examples[j].id == d[3].id) {
                saw_long = true;
                CHECK(n_real == 64);
            }
        }
    CHECK(saw_long);
}
