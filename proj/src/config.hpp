#pragma once

#include <map>
#include <string>

#include "transformer.hpp"

namespace genmc {

// Flat key-value text documents: one `key = value` per line, '#' comments.
// Used for config files, run snapshots and checkpoint metadata.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_kv_text(const std::string& text, const std::string& where);
KeyValues parse_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const KeyValues& kv);
std::string kv_to_string(const KeyValues& kv);

struct TrainConfig {
    double learning_rate = 1e-4;
    long batch_size = 8;
    long max_epochs = 30;
    long patience = 5;
    double warmup_fraction = 0.1;
    double weight_decay = 0.01;

    void validate() const;
};

// Applies `kv` on top of `base`; rejects unknown keys. Both structs share
// one flat namespace so a single config file (or --set flag) covers them.
ModelConfig model_config_from_kv(const KeyValues& kv, ModelConfig base,
                                 bool ignore_foreign = true);
TrainConfig train_config_from_kv(const KeyValues& kv, TrainConfig base,
                                 bool ignore_foreign = true);
// throws ValidationError when kv holds a key neither config understands
void check_known_keys(const KeyValues& kv);

KeyValues model_config_to_kv(const ModelConfig& cfg);
KeyValues train_config_to_kv(const TrainConfig& cfg);

// FNV-1a hash of a config snapshot, printed in run metadata and bench output
std::string config_hash(const KeyValues& kv);

}  // namespace genmc
