#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "baselines.hpp"

namespace genmc {

namespace fs = std::filesystem;

// ---- Adam ------------------------------------------------------------------

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

bool decays(const std::string& name) {
    // decoupled decay excludes layer-norm gains and every bias
    return !(name.ends_with(".bias") || name.ends_with(".gamma") || name.ends_with(".beta"));
}

}  // namespace

AdamOptimizer::AdamOptimizer(ParamList params, double weight_decay)
    : weight_decay_(weight_decay) {
    for (auto& p : params) {
        Slot s;
        s.name = p.name;
        s.param = p.tensor;
        s.m.assign(p.tensor.data().size(), 0.0);
        s.v.assign(p.tensor.data().size(), 0.0);
        s.decay = decays(p.name);
        slots_.push_back(std::move(s));
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (auto& s : slots_) {
        if (!s.param.has_grad()) continue;  // parameter unused this step
        const std::vector<double>& g = s.param.grad();
        std::vector<double>& w = s.param.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("adam: non-finite gradient for parameter " + s.name);
            s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g[i];
            s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double m_hat = s.m[i] / bc1;
            const double v_hat = s.v[i] / bc2;
            if (s.decay && weight_decay_ != 0.0) w[i] -= lr * weight_decay_ * w[i];
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }
}

double lr_schedule(long step, long total_steps, double peak, double warmup_fraction) {
    if (total_steps <= 0) throw ContractError("lr_schedule: total_steps must be positive");
    if (step >= total_steps) return 0.0;
    if (step < 0) throw ContractError("lr_schedule: negative step");
    const long warmup = static_cast<long>(warmup_fraction * static_cast<double>(total_steps));
    if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    return peak * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

bool EarlyStopper::observe(long epoch, double dev_accuracy) {
    if (dev_accuracy > best_) {
        best_ = dev_accuracy;
        best_epoch_ = epoch;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

// ---- evaluation -----------------------------------------------------------

double evaluate_accuracy(const Model& model, const std::vector<EncodedExample>& examples) {
    if (examples.empty()) throw ValidationError("evaluate: empty dataset");
    long correct = 0;
    for (const EncodedExample& ex : examples)
        if (model.predict(ex) == ex.answer_index) ++correct;
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double evaluate_accuracy(const Model& model, const Vocab& vocab, const Dataset& data) {
    return evaluate_accuracy(model, encode_dataset(vocab, data, model.config()));
}

// ---- training loop -----------------------------------------------------------

namespace {

std::vector<std::vector<double>> snapshot_params(const Model& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) out.push_back(p.tensor.data());
    return out;
}

void restore_params(const Model& model, const std::vector<std::vector<double>>& snap) {
    ParamList params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        const_cast<Tensor&>(params[i].tensor).data() = snap[i];
}

struct EpochResult {
    double dev_accuracy;
};

// one optimization phase over a fixed model: epochs, batches, Adam with the
// warmup/decay schedule, early stopping on dev accuracy, best weights kept
struct Phase {
    Model& model;
    const std::vector<EncodedExample>& train;
    const std::vector<EncodedExample>& dev;
    const TrainConfig& cfg;
    long seed;

    long best_epoch = -1;
    double best_dev = 0.0;
    long epochs_run = 0;
    std::vector<std::vector<double>> best_weights;

    void run() {
        AdamOptimizer opt(model.trainable_parameters(), cfg.weight_decay);
        const long batches_per_epoch =
            (static_cast<long>(train.size()) + cfg.batch_size - 1) / cfg.batch_size;
        const long total_steps = cfg.max_epochs * batches_per_epoch;
        EarlyStopper stopper(cfg.patience);
        Rng shuffle_master(static_cast<std::uint64_t>(seed));
        long global_step = 0;

        std::vector<long> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<long>(i);

        for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            Rng epoch_rng = shuffle_master.fork(static_cast<std::uint64_t>(epoch));
            epoch_rng.shuffle(order);
            for (long b = 0; b < batches_per_epoch; ++b) {
                const long lo = b * cfg.batch_size;
                const long hi = std::min<long>(static_cast<long>(train.size()),
                                               lo + cfg.batch_size);
                opt.zero_grad();
                const double inv = 1.0 / static_cast<double>(hi - lo);
                for (long k = lo; k < hi; ++k) {
                    const EncodedExample& ex = train[static_cast<std::size_t>(order[k])];
                    LossBundle lb = model.loss(ex);
                    if (!std::isfinite(lb.total.item()))
                        throw NumericError("train: non-finite loss at epoch " +
                                           std::to_string(epoch) + ", batch " + std::to_string(b));
                    scale(lb.total, inv).backward();
                }
                opt.step(lr_schedule(global_step, total_steps, cfg.learning_rate,
                                     cfg.warmup_fraction));
                ++global_step;
            }
            epochs_run = epoch;
            const double dev_acc = evaluate_accuracy(model, dev);
            if (stopper.observe(epoch, dev_acc)) {
                best_epoch = epoch;
                best_dev = dev_acc;
                best_weights = snapshot_params(model);
            }
            if (stopper.should_stop()) break;
        }
        if (!best_weights.empty()) restore_params(model, best_weights);
    }
};

std::vector<EncodedExample> reencode_with_clues(const ClueGeneratorModel& generator,
                                                const std::vector<EncodedExample>& examples,
                                                long max_source_len) {
    std::vector<EncodedExample> out = examples;
    for (EncodedExample& ex : out) {
        const std::vector<int> clue = generator.decode_clue(ex.question_ids);
        for (int i = 0; i < ex.n_options(); ++i)
            ex.option_pair_ids[static_cast<std::size_t>(i)] =
                token_clue_pair_ids(ex, i, clue, max_source_len);
    }
    return out;
}

void write_run_outputs(const std::string& out_dir, const Model& model, const Vocab& vocab,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const SeedRunResult& result) {
    fs::create_directories(out_dir);
    save_checkpoint(out_dir + "/checkpoint", model, vocab);

    KeyValues cfg = model_config_to_kv(model_cfg);
    for (auto& [k, v] : train_config_to_kv(train_cfg)) cfg[k] = v;
    cfg["kind"] = result.kind;
    cfg["seed"] = std::to_string(result.seed);
    write_kv_file(out_dir + "/config.txt", cfg);

    KeyValues metrics;
    std::ostringstream dev, test, wall;
    dev << std::setprecision(17) << result.dev_accuracy;
    test << std::setprecision(17) << result.test_accuracy;
    wall << std::fixed << std::setprecision(3) << result.wall_clock_s;
    metrics["kind"] = result.kind;
    metrics["seed"] = std::to_string(result.seed);
    metrics["dev_accuracy"] = dev.str();
    metrics["test_accuracy"] = test.str();
    metrics["best_epoch"] = std::to_string(result.best_epoch);
    metrics["epochs_run"] = std::to_string(result.epochs_run);
    metrics["wall_clock_s"] = wall.str();
    metrics["config_hash"] = result.config_hash;
    write_kv_file(out_dir + "/metrics.txt", metrics);

    std::ofstream manifest(out_dir + "/manifest.txt");
    manifest << "checkpoint/\nconfig.txt\nmetrics.txt\n";
}

}  // namespace

SeedRunResult train_model(ModelKind kind, const TrainData& data, ModelConfig model_cfg,
                          const TrainConfig& train_cfg, long seed, const std::string& out_dir) {
    train_cfg.validate();
    if (data.train.empty()) throw ValidationError("train: empty training set");
    if (data.dev.empty()) throw ValidationError("train: empty dev set");
    const auto t0 = std::chrono::steady_clock::now();

    const Vocab vocab = build_vocab(data.train);
    model_cfg.vocab_size = vocab.size();
    model_cfg.validate();

    const std::vector<EncodedExample> train_enc = encode_dataset(vocab, data.train, model_cfg);
    const std::vector<EncodedExample> dev_enc = encode_dataset(vocab, data.dev, model_cfg);
    const std::vector<EncodedExample> test_enc =
        data.test.empty() ? std::vector<EncodedExample>{} : encode_dataset(vocab, data.test, model_cfg);

    std::unique_ptr<Model> final_model;
    SeedRunResult result;
    result.kind = to_string(kind);
    result.seed = seed;

    if (kind == ModelKind::TOKEN_CLUE) {
        // stage 1: the generator alone, early-stopped on dev exact match
        auto generator = std::make_unique<ClueGeneratorModel>(model_cfg,
                                                              static_cast<std::uint64_t>(seed));
        Phase stage1{*generator, train_enc, dev_enc, train_cfg, seed};
        stage1.run();
        // stage 2: freeze the generator, decode clues once, train a fresh
        // encoder+MLP on the clue-augmented pairs
        const std::vector<EncodedExample> train2 =
            reencode_with_clues(*generator, train_enc, model_cfg.max_source_len);
        const std::vector<EncodedExample> dev2 =
            reencode_with_clues(*generator, dev_enc, model_cfg.max_source_len);
        auto reader = std::make_unique<T2TEncModel>(
            model_cfg, static_cast<std::uint64_t>(seed) ^ 0x5747C1F0ULL);
        Phase stage2{*reader, train2, dev2, train_cfg, seed + 1};
        stage2.run();

        result.best_epoch = stage2.best_epoch;
        result.dev_accuracy = stage2.best_dev;
        result.epochs_run = stage1.epochs_run + stage2.epochs_run;
        // the composite decodes clues on the fly, so the plain encoding is right here
        final_model = std::make_unique<TokenClueModel>(std::move(generator), std::move(reader));
        if (!test_enc.empty()) result.test_accuracy = evaluate_accuracy(*final_model, test_enc);
    } else {
        final_model = make_model(kind, model_cfg, static_cast<std::uint64_t>(seed));
        Phase phase{*final_model, train_enc, dev_enc, train_cfg, seed};
        phase.run();
        result.best_epoch = phase.best_epoch;
        result.dev_accuracy = phase.best_dev;
        result.epochs_run = phase.epochs_run;
        if (!test_enc.empty()) result.test_accuracy = evaluate_accuracy(*final_model, test_enc);
    }

    KeyValues hash_kv = model_config_to_kv(model_cfg);
    for (auto& [k, v] : train_config_to_kv(train_cfg)) hash_kv[k] = v;
    hash_kv["kind"] = result.kind;
    result.config_hash = config_hash(hash_kv);
    result.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!out_dir.empty())
        write_run_outputs(out_dir, *final_model, vocab, model_cfg, train_cfg, result);
    return result;
}

// ---- reporting -----------------------------------------------------------------

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs) {
    const double mu = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::string format_mean_std(const std::vector<double>& percents) {
    if (percents.empty()) throw ValidationError("report: no runs to aggregate");
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << mean_of(percents) << " (±"
       << population_std(percents) << ")";
    return os.str();
}

std::string multi_seed_report(const std::string& runs_dir) {
    if (!fs::is_directory(runs_dir)) throw IoError("runs directory not found: " + runs_dir);
    struct Rows {
        std::vector<double> dev, test;
        std::vector<long> seeds;
    };
    std::map<std::string, Rows> by_kind;
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(runs_dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const fs::path& p : entries) {
        const fs::path metrics = p / "metrics.txt";
        if (!fs::exists(metrics)) continue;
        KeyValues kv = parse_kv_file(metrics.string());
        try {
            Rows& r = by_kind[kv.at("kind")];
            r.dev.push_back(std::stod(kv.at("dev_accuracy")) * 100.0);
            r.test.push_back(std::stod(kv.at("test_accuracy")) * 100.0);
            r.seeds.push_back(std::stol(kv.at("seed")));
        } catch (const std::exception& e) {
            throw ValidationError("report: bad metrics file " + metrics.string() + " (" +
                                  e.what() + ")");
        }
    }
    if (by_kind.empty()) throw ValidationError("report: no metrics.txt found under " + runs_dir);
    std::ostringstream os;
    os << std::left << std::setw(14) << "model" << std::setw(18) << "dev" << std::setw(18)
       << "test" << "seeds\n";
    for (const auto& [kind, rows] : by_kind) {
        os << std::left << std::setw(14) << kind << std::setw(18) << format_mean_std(rows.dev)
           << std::setw(18) << format_mean_std(rows.test);
        for (std::size_t i = 0; i < rows.seeds.size(); ++i)
            os << (i ? "," : "") << rows.seeds[i];
        os << "\n";
    }
    return os.str();
}

ParamCount count_params(const Model& model) {
    ParamCount out;
    std::map<std::string, long> groups;
    for (const auto& p : model.parameters()) {
        const long n = p.tensor.numel();
        out.total += n;
        const std::size_t dot = p.name.find('.');
        groups[p.name.substr(0, dot)] += n;
    }
    out.groups.assign(groups.begin(), groups.end());
    return out;
}

BenchResult bench_latency(const Model& model, const Vocab& vocab, const Dataset& data) {
    if (data.empty()) throw ValidationError("bench: empty dataset");
    const std::vector<EncodedExample> enc = encode_dataset(vocab, data, model.config());
    BenchResult out;
    KeyValues kv = model_config_to_kv(model.config());
    kv["kind"] = to_string(model.kind());
    out.config_hash = config_hash(kv);
    // warm-up pass, excluded from the statistics
    (void)model.predict(enc.front());
    std::vector<double> seconds;
    for (const EncodedExample& ex : enc) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)model.predict(ex);
        seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    out.mean_seconds = mean_of(seconds);
    out.std_seconds = population_std(seconds);
    out.n_questions = static_cast<long>(seconds.size());
    return out;
}

GridResult grid_search(ModelKind kind, const TrainData& data, const ModelConfig& model_cfg,
                       const TrainConfig& base, const std::vector<double>& learning_rates,
                       const std::vector<long>& batch_sizes, long seed,
                       const std::string& out_dir) {
    if (learning_rates.empty() || batch_sizes.empty())
        throw ValidationError("grid search: empty grid");
    GridResult best;
    bool have = false;
    for (double lr : learning_rates) {
        for (long bs : batch_sizes) {
            TrainConfig cell = base;
            cell.learning_rate = lr;
            cell.batch_size = bs;
            std::ostringstream cell_dir;
            if (!out_dir.empty()) {
                cell_dir << out_dir << "/grid_lr" << lr << "_b" << bs;
            }
            SeedRunResult run = train_model(kind, data, model_cfg, cell, seed, cell_dir.str());
            if (!have || run.dev_accuracy > best.best_run.dev_accuracy) {
                have = true;
                best.best_config = cell;
                best.best_run = run;
            }
        }
    }
    return best;
}

}  // namespace genmc
