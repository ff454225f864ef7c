#pragma once

#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "model.hpp"

namespace genmc {

// Adam with bias correction and decoupled weight decay. Layer-norm gains
// and biases are excluded from decay; everything else (embeddings included)
// decays. beta1=0.9, beta2=0.999, eps=1e-8.
class AdamOptimizer {
public:
    AdamOptimizer(ParamList params, double weight_decay);

    void zero_grad();
    // one update with the given step size
    void step(double lr);

    long steps_taken() const { return t_; }

private:
    struct Slot {
        std::string name;
        Tensor param;
        std::vector<double> m, v;
        bool decay;
    };
    std::vector<Slot> slots_;
    double weight_decay_;
    long t_ = 0;
};

// linear ramp to `peak` over the first warmup_fraction of steps, then
// linear decay to zero; steps beyond total clamp to zero
double lr_schedule(long step, long total_steps, double peak, double warmup_fraction);

// Strict-improvement early stopping; ties keep the earlier epoch.
struct EarlyStopper {
    explicit EarlyStopper(long patience) : patience_(patience) {}

    bool observe(long epoch, double dev_accuracy);  // true when improved
    bool should_stop() const { return stale_ >= patience_; }
    long best_epoch() const { return best_epoch_; }
    double best_accuracy() const { return best_; }

private:
    long patience_;
    double best_ = -1.0;
    long best_epoch_ = -1;
    long stale_ = 0;
};

struct SeedRunResult {
    std::string kind;
    long seed = 0;
    double dev_accuracy = 0.0;   // at the best epoch, fraction in [0,1]
    double test_accuracy = 0.0;  // of the best checkpoint
    long best_epoch = 0;
    long epochs_run = 0;
    double wall_clock_s = 0.0;
    std::string config_hash;
};

struct TrainData {
    Dataset train, dev, test;
};

// Full training protocol for one (kind, config, seed): deterministic init
// and shuffles, per-epoch dev evaluation, early stopping with the best
// checkpoint kept, test accuracy of the best checkpoint reported. The
// token-clue kind runs its two pipeline stages internally. When out_dir is
// nonempty the run writes checkpoint/, metrics.txt, config.txt and a
// manifest.
SeedRunResult train_model(ModelKind kind, const TrainData& data, ModelConfig model_cfg,
                          const TrainConfig& train_cfg, long seed, const std::string& out_dir);

// fraction of examples whose prediction matches the answer index
double evaluate_accuracy(const Model& model, const std::vector<EncodedExample>& examples);
double evaluate_accuracy(const Model& model, const Vocab& vocab, const Dataset& data);

double mean_of(const std::vector<double>& xs);
double population_std(const std::vector<double>& xs);
// "mm.mm (±s.ss)" over accuracies given in percent
std::string format_mean_std(const std::vector<double>& percents);

// one row per model kind, aggregated over the per-seed metrics files found
// under runs_dir/*/metrics.txt
std::string multi_seed_report(const std::string& runs_dir);

struct ParamCount {
    long total = 0;
    std::vector<std::pair<std::string, long>> groups;  // by name prefix
};
ParamCount count_params(const Model& model);

struct BenchResult {
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
    long n_questions = 0;
    std::string config_hash;
};
// per-question wall clock, first (warm-up) question excluded
BenchResult bench_latency(const Model& model, const Vocab& vocab, const Dataset& data);

// sequential {learning_rate} x {batch_size} search selecting by dev
// accuracy; each cell trains with the given seed
struct GridResult {
    TrainConfig best_config;
    SeedRunResult best_run;
};
GridResult grid_search(ModelKind kind, const TrainData& data, const ModelConfig& model_cfg,
                       const TrainConfig& base, const std::vector<double>& learning_rates,
                       const std::vector<long>& batch_sizes, long seed,
                       const std::string& out_dir);

}  // namespace genmc
