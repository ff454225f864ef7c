#include "genmc/capi.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "training.hpp"

using namespace genmc;

struct gmc_dataset {
    Dataset data;
};

struct gmc_model {
    LoadedModel loaded;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
gmc_status wrap(Fn&& fn) {
    try {
        fn();
        return GMC_OK;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return GMC_ERR_IO;
    } catch (const NumericError& e) {
        g_last_error = e.what();
        return GMC_ERR_NUMERIC;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GMC_ERR_VALIDATION;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(bool ok, const char* message) {
    if (!ok) throw ValidationError(message);
}

}  // namespace

extern "C" {

const char* gmc_last_error(void) { return g_last_error.c_str(); }

gmc_status gmc_dataset_load(const char* path, gmc_dataset** out) {
    return wrap([&] {
        require(path && out, "gmc_dataset_load: null argument");
        auto holder = std::make_unique<gmc_dataset>();
        holder->data = load_jsonl(path);
        *out = holder.release();
    });
}

long gmc_dataset_size(const gmc_dataset* data) {
    return data ? static_cast<long>(data->data.size()) : 0;
}

void gmc_dataset_free(gmc_dataset* data) { delete data; }

gmc_status gmc_synth(const char* task, long n_examples, long n_options, long vocab_size,
                     uint64_t seed, const char* split, const char* out_path) {
    return wrap([&] {
        require(task && out_path, "gmc_synth: null argument");
        SynthParams p;
        p.n_examples = n_examples;
        p.n_options = n_options;
        p.vocab_size = vocab_size;
        p.seed = seed;
        p.split = split ? split : "";
        const std::string task_name = task;
        Dataset d;
        if (task_name == "copy") d = gen_synth_copy(p);
        else if (task_name == "twohop") d = gen_synth_twohop(p);
        else throw ValidationError("gmc_synth: unknown task '" + task_name + "'");
        save_jsonl(d, out_path, synth_header(task_name, p));
    });
}

gmc_status gmc_model_load(const char* checkpoint_dir, gmc_model** out) {
    return wrap([&] {
        require(checkpoint_dir && out, "gmc_model_load: null argument");
        auto holder = std::make_unique<gmc_model>();
        holder->loaded = load_checkpoint(checkpoint_dir);
        *out = holder.release();
    });
}

void gmc_model_free(gmc_model* model) { delete model; }

gmc_status gmc_evaluate(const gmc_model* model, const gmc_dataset* data, double* accuracy_out) {
    return wrap([&] {
        require(model && data && accuracy_out, "gmc_evaluate: null argument");
        *accuracy_out =
            evaluate_accuracy(*model->loaded.model, model->loaded.vocab, data->data);
    });
}

gmc_status gmc_clue_dump(const gmc_model* model, const gmc_dataset* data, const char* out_path) {
    return wrap([&] {
        require(model && data, "gmc_clue_dump: null argument");
        const Model& m = *model->loaded.model;
        const Vocab& vocab = model->loaded.vocab;

        std::ofstream file;
        if (out_path) {
            file.open(out_path);
            if (!file) throw IoError(std::string("cannot write clue dump ") + out_path);
        }
        std::ostream& out = out_path ? static_cast<std::ostream&>(file) : std::cout;

        for (const MCQAExample& raw : data->data) {
            const EncodedExample ex = encode_example(vocab, raw, m.config());
            std::vector<int> clue;
            switch (m.kind()) {
                case ModelKind::GENMC:
                case ModelKind::WEAK_CLUE:
                    clue = dynamic_cast<const GenMCModel&>(m).generate_clue(ex.question_ids).first;
                    break;
                case ModelKind::TOKEN_CLUE:
                    clue = dynamic_cast<const TokenClueModel&>(m).generator().decode_clue(
                        ex.question_ids);
                    break;
                case ModelKind::CLUE_GENERATOR:
                    clue = dynamic_cast<const ClueGeneratorModel&>(m).decode_clue(ex.question_ids);
                    break;
                default:
                    throw ValidationError("clue dump: model kind '" + to_string(m.kind()) +
                                          "' has no clue generator");
            }
            out << raw.id << '\t' << vocab.decode(clue) << '\n';
        }
    });
}

gmc_status gmc_bench(const gmc_model* model, const gmc_dataset* data, gmc_bench_result* out) {
    return wrap([&] {
        require(model && data && out, "gmc_bench: null argument");
        const BenchResult r =
            bench_latency(*model->loaded.model, model->loaded.vocab, data->data);
        out->mean_seconds = r.mean_seconds;
        out->std_seconds = r.std_seconds;
        out->n_questions = r.n_questions;
        out->total_params = count_params(*model->loaded.model).total;
        std::snprintf(out->config_hash, sizeof(out->config_hash), "%s", r.config_hash.c_str());
    });
}

gmc_status gmc_count_params(const gmc_model* model, long* total_out, char** breakdown_out) {
    return wrap([&] {
        require(model && total_out, "gmc_count_params: null argument");
        const ParamCount c = count_params(*model->loaded.model);
        *total_out = c.total;
        if (breakdown_out) {
            std::string table;
            for (const auto& [group, n] : c.groups)
                table += group + " " + std::to_string(n) + "\n";
            *breakdown_out = dup_string(table);
        }
    });
}

gmc_status gmc_train(const gmc_train_args* args, gmc_train_summary* out) {
    return wrap([&] {
        require(args && out, "gmc_train: null argument");
        require(args->model_kind, "gmc_train: model_kind is required");
        require(args->train_paths && args->n_train_paths > 0,
                "gmc_train: at least one training file is required");
        require(args->dev_path, "gmc_train: dev_path is required");
        require(args->out_dir, "gmc_train: out_dir is required");

        const ModelKind kind = model_kind_from_string(args->model_kind);
        TrainData data;
        for (long i = 0; i < args->n_train_paths; ++i) {
            Dataset part = load_jsonl(args->train_paths[i]);
            data.train.insert(data.train.end(), part.begin(), part.end());
        }
        data.dev = load_jsonl(args->dev_path);
        if (args->test_path) data.test = load_jsonl(args->test_path);

        ModelConfig model_cfg;
        TrainConfig train_cfg;
        KeyValues kv;
        if (args->config_path) kv = parse_kv_file(args->config_path);
        if (args->overrides) {
            for (auto& [k, v] : parse_kv_text(args->overrides, "overrides")) kv[k] = v;
        }
        check_known_keys(kv);
        model_cfg = model_config_from_kv(kv, model_cfg);
        train_cfg = train_config_from_kv(kv, train_cfg);

        SeedRunResult r;
        if (args->grid_search) {
            GridResult g = grid_search(kind, data, model_cfg, train_cfg, {1e-4, 5e-5, 1e-5},
                                       {8, 64}, args->seed, args->out_dir);
            r = g.best_run;
        } else {
            r = train_model(kind, data, model_cfg, train_cfg, args->seed, args->out_dir);
        }
        out->dev_accuracy = r.dev_accuracy;
        out->test_accuracy = r.test_accuracy;
        out->best_epoch = r.best_epoch;
        out->epochs_run = r.epochs_run;
        out->wall_clock_s = r.wall_clock_s;
    });
}

gmc_status gmc_report(const char* runs_dir, char** table_out) {
    return wrap([&] {
        require(runs_dir && table_out, "gmc_report: null argument");
        *table_out = dup_string(multi_seed_report(runs_dir));
    });
}

void gmc_string_free(char* s) { std::free(s); }

}  // extern "C"
