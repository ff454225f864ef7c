#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "genmc/capi.h"

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "genmc-capi";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synth writes reproducible JSONL through the C API") {
    const std::string a = temp_path("copy_a.jsonl");
    const std::string b = temp_path("copy_b.jsonl");
    REQUIRE(gmc_synth("copy", 30, 4, 64, 9, nullptr, a.c_str()) == GMC_OK);
    REQUIRE(gmc_synth("copy", 30, 4, 64, 9, nullptr, b.c_str()) == GMC_OK);
    CHECK(read_file(a) == read_file(b));  // byte-for-byte

    gmc_dataset* data = nullptr;
    REQUIRE(gmc_dataset_load(a.c_str(), &data) == GMC_OK);
    CHECK(gmc_dataset_size(data) == 30);
    gmc_dataset_free(data);
}

TEST_CASE("error paths set status codes and messages") {
    gmc_dataset* data = nullptr;
    CHECK(gmc_dataset_load("/nonexistent/nope.jsonl", &data) == GMC_ERR_IO);
    CHECK(std::strlen(gmc_last_error()) > 0);

    CHECK(gmc_synth("unknown-task", 5, 4, 64, 1, nullptr, temp_path("x.jsonl").c_str()) ==
          GMC_ERR_VALIDATION);
    CHECK(gmc_synth("copy", -5, 4, 64, 1, nullptr, temp_path("y.jsonl").c_str()) ==
          GMC_ERR_VALIDATION);

    gmc_model* model = nullptr;
    CHECK(gmc_model_load("/nonexistent/ckpt", &model) == GMC_ERR_IO);
}

TEST_CASE("train, evaluate, clue-dump and bench through the C API") {
    const std::string train = temp_path("train.jsonl");
    const std::string dev = temp_path("dev.jsonl");
    REQUIRE(gmc_synth("copy", 24, 4, 64, 1, nullptr, train.c_str()) == GMC_OK);
    REQUIRE(gmc_synth("copy", 12, 4, 64, 2, nullptr, dev.c_str()) == GMC_OK);

    const std::string out_dir = temp_path("run");
    fs::remove_all(out_dir);
    const char* train_paths[] = {train.c_str()};
    gmc_train_args args{};
    args.model_kind = "genmc";
    args.train_paths = train_paths;
    args.n_train_paths = 1;
    args.dev_path = dev.c_str();
    args.test_path = dev.c_str();
    args.overrides =
        "d_model = 16\nn_heads = 2\nn_enc_layers = 1\nn_dec_layers = 1\nd_ff = 24\n"
        "max_epochs = 2\nlearning_rate = 0.001\n";
    args.seed = 1;
    args.out_dir = out_dir.c_str();
    gmc_train_summary summary{};
    REQUIRE(gmc_train(&args, &summary) == GMC_OK);
    CHECK(summary.epochs_run == 2);

    gmc_model* model = nullptr;
    REQUIRE(gmc_model_load((out_dir + "/checkpoint").c_str(), &model) == GMC_OK);
    gmc_dataset* data = nullptr;
    REQUIRE(gmc_dataset_load(dev.c_str(), &data) == GMC_OK);

    double acc = -1.0;
    REQUIRE(gmc_evaluate(model, data, &acc) == GMC_OK);
    CHECK(acc == summary.test_accuracy);  // dev reused as test above

    const std::string clues = temp_path("clues.tsv");
    REQUIRE(gmc_clue_dump(model, data, clues.c_str()) == GMC_OK);
    std::ifstream f(clues);
    std::string line;
    long lines = 0;
    while (std::getline(f, line)) {
        ++lines;
        CHECK(line.find('\t') != std::string::npos);
        CHECK(line.substr(0, 5) == "copy-");
    }
    CHECK(lines == 12);

    gmc_bench_result bench{};
    REQUIRE(gmc_bench(model, data, &bench) == GMC_OK);
    CHECK(bench.n_questions == 12);
    CHECK(bench.total_params > 0);
    CHECK(std::strlen(bench.config_hash) > 0);

    long total = 0;
    char* breakdown = nullptr;
    REQUIRE(gmc_count_params(model, &total, &breakdown) == GMC_OK);
    CHECK(total == bench.total_params);
    CHECK(std::string(breakdown).find("encoder") != std::string::npos);
    gmc_string_free(breakdown);

    gmc_dataset_free(data);
    gmc_model_free(model);

    char* table = nullptr;
    // the run dir itself contains metrics.txt, so its parent aggregates it
    REQUIRE(gmc_report(fs::path(out_dir).parent_path().c_str(), &table) == GMC_OK);
    CHECK(std::string(table).find("genmc") != std::string::npos);
    gmc_string_free(table);
}
