// Command-line front end. Links the shared genmc library through its C API
// only; all heavy lifting happens behind the opaque handles.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "genmc/capi.h"

namespace {

int fail(gmc_status status) {
    std::fprintf(stderr, "error: %s\n", gmc_last_error());
    return static_cast<int>(status);
}

struct TrainFlags {
    std::string model;
    std::vector<std::string> train_files;
    std::string dev_file, test_file, config_file, out_dir;
    std::vector<std::string> sets;
    long seed = 1;
    double lr = 0.0;
    long batch_size = 0;
    long epochs = 0;
    bool grid = false;
};

int run_train(const TrainFlags& flags) {
    std::string overrides;
    for (const std::string& kv : flags.sets) overrides += kv + "\n";
    if (flags.lr > 0.0) overrides += "learning_rate = " + std::to_string(flags.lr) + "\n";
    if (flags.batch_size > 0) overrides += "batch_size = " + std::to_string(flags.batch_size) + "\n";
    if (flags.epochs > 0) overrides += "max_epochs = " + std::to_string(flags.epochs) + "\n";

    std::vector<const char*> train_ptrs;
    for (const std::string& p : flags.train_files) train_ptrs.push_back(p.c_str());

    gmc_train_args args{};
    args.model_kind = flags.model.c_str();
    args.train_paths = train_ptrs.data();
    args.n_train_paths = static_cast<long>(train_ptrs.size());
    args.dev_path = flags.dev_file.c_str();
    args.test_path = flags.test_file.empty() ? nullptr : flags.test_file.c_str();
    args.config_path = flags.config_file.empty() ? nullptr : flags.config_file.c_str();
    args.overrides = overrides.empty() ? nullptr : overrides.c_str();
    args.seed = flags.seed;
    args.out_dir = flags.out_dir.c_str();
    args.grid_search = flags.grid ? 1 : 0;

    gmc_train_summary summary{};
    const gmc_status status = gmc_train(&args, &summary);
    if (status != GMC_OK) return fail(status);
    std::printf("model          %s\n", flags.model.c_str());
    std::printf("seed           %ld\n", flags.seed);
    std::printf("best epoch     %ld (of %ld run)\n", summary.best_epoch, summary.epochs_run);
    std::printf("dev accuracy   %.4f\n", summary.dev_accuracy);
    if (args.test_path) std::printf("test accuracy  %.4f\n", summary.test_accuracy);
    std::printf("wall clock     %.1fs\n", summary.wall_clock_s);
    std::printf("run dir        %s\n", flags.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GenMC: clue-generating multiple-choice QA models at desk scale"};
    app.require_subcommand(1);

    // train
    TrainFlags tf;
    CLI::App* train = app.add_subcommand("train", "train a model and write a run directory");
    train->add_option("--model", tf.model, "genmc|t2t-vanilla|t2t-enc|weak-clue|token-clue")
        ->required();
    train->add_option("--train", tf.train_files, "training JSONL (repeat to concatenate)")
        ->required();
    train->add_option("--dev", tf.dev_file, "dev JSONL")->required();
    train->add_option("--test", tf.test_file, "test JSONL");
    train->add_option("--config", tf.config_file, "flat key = value config file");
    train->add_option("--seed", tf.seed, "random seed");
    train->add_option("--out", tf.out_dir, "run output directory")->required();
    train->add_option("--set", tf.sets, "config override key=value (repeatable)");
    train->add_option("--lr", tf.lr, "learning rate override");
    train->add_option("--batch-size", tf.batch_size, "batch size override");
    train->add_option("--epochs", tf.epochs, "max epochs override");
    train->add_flag("--grid", tf.grid, "grid-search {1e-4,5e-5,1e-5} x {8,64} by dev accuracy");

    // eval
    std::string ckpt, data_file, out_file;
    CLI::App* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a dataset");
    eval->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    eval->add_option("--data", data_file, "JSONL dataset")->required();

    // clue
    CLI::App* clue = app.add_subcommand("clue", "dump generated clues, one 'id<TAB>text' per line");
    clue->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    clue->add_option("--data", data_file, "JSONL dataset")->required();
    clue->add_option("--out", out_file, "output file (default stdout)");

    // synth
    std::string task, split, synth_out;
    long n = 0, options = 4, vocab = 0;
    std::uint64_t seed = 1;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic MCQA dataset");
    synth->add_option("--task", task, "copy|twohop")->required();
    synth->add_option("--n", n, "number of examples")->required();
    synth->add_option("--options", options, "options per question");
    synth->add_option("--vocab", vocab, "symbol budget")->required();
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--split", split, "train|dev|test (disjoint key shares)");
    synth->add_option("--out", synth_out, "output JSONL path")->required();

    // report
    std::string runs_dir;
    CLI::App* report = app.add_subcommand("report", "aggregate runs into a mean (±std) table");
    report->add_option("--runs", runs_dir, "directory holding run subdirectories")->required();

    // bench
    CLI::App* bench = app.add_subcommand("bench", "seconds per question and parameter counts");
    bench->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    bench->add_option("--data", data_file, "JSONL dataset")->required();

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return run_train(tf);

    if (eval->parsed()) {
        gmc_model* model = nullptr;
        gmc_dataset* data = nullptr;
        gmc_status s = gmc_model_load(ckpt.c_str(), &model);
        if (s != GMC_OK) return fail(s);
        s = gmc_dataset_load(data_file.c_str(), &data);
        if (s != GMC_OK) return fail(s);
        double acc = 0.0;
        s = gmc_evaluate(model, data, &acc);
        const long n_examples = gmc_dataset_size(data);
        gmc_dataset_free(data);
        gmc_model_free(model);
        if (s != GMC_OK) return fail(s);
        std::printf("examples  %ld\naccuracy  %.4f\n", n_examples, acc);
        return 0;
    }

    if (clue->parsed()) {
        gmc_model* model = nullptr;
        gmc_dataset* data = nullptr;
        gmc_status s = gmc_model_load(ckpt.c_str(), &model);
        if (s != GMC_OK) return fail(s);
        s = gmc_dataset_load(data_file.c_str(), &data);
        if (s != GMC_OK) return fail(s);
        s = gmc_clue_dump(model, data, out_file.empty() ? nullptr : out_file.c_str());
        gmc_dataset_free(data);
        gmc_model_free(model);
        return s == GMC_OK ? 0 : fail(s);
    }

    if (synth->parsed()) {
        const gmc_status s = gmc_synth(task.c_str(), n, options, vocab, seed,
                                       split.empty() ? nullptr : split.c_str(), synth_out.c_str());
        if (s != GMC_OK) return fail(s);
        std::printf("wrote %ld %s examples to %s\n", n, task.c_str(), synth_out.c_str());
        return 0;
    }

    if (report->parsed()) {
        char* table = nullptr;
        const gmc_status s = gmc_report(runs_dir.c_str(), &table);
        if (s != GMC_OK) return fail(s);
        std::printf("%s", table);
        gmc_string_free(table);
        return 0;
    }

    if (bench->parsed()) {
        gmc_model* model = nullptr;
        gmc_dataset* data = nullptr;
        gmc_status s = gmc_model_load(ckpt.c_str(), &model);
        if (s != GMC_OK) return fail(s);
        s = gmc_dataset_load(data_file.c_str(), &data);
        if (s != GMC_OK) return fail(s);
        gmc_bench_result r{};
        s = gmc_bench(model, data, &r);
        long total = 0;
        char* breakdown = nullptr;
        if (s == GMC_OK) s = gmc_count_params(model, &total, &breakdown);
        gmc_dataset_free(data);
        gmc_model_free(model);
        if (s != GMC_OK) return fail(s);
        std::printf("questions        %ld\n", r.n_questions);
        std::printf("mean latency     %.6fs\n", r.mean_seconds);
        std::printf("std latency      %.6fs\n", r.std_seconds);
        std::printf("parameters       %ld\n", total);
        std::printf("config hash      %s\n", r.config_hash);
        std::printf("param breakdown:\n%s", breakdown);
        gmc_string_free(breakdown);
        return 0;
    }

    return 0;
}
