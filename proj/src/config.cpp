#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace genmc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

const std::set<std::string> kModelKeys = {
    "d_model", "n_heads", "n_enc_layers", "n_dec_layers", "d_ff",
    "vocab_size", "max_source_len", "max_target_len", "dropout_rate",
};

const std::set<std::string> kTrainKeys = {
    "learning_rate", "batch_size", "max_epochs", "patience",
    "warmup_fraction", "weight_decay",
};

}  // namespace

KeyValues parse_kv_text(const std::string& text, const std::string& where) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError(where + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ValidationError(where + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

KeyValues parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_kv_text(buf.str(), path);
}

void write_kv_file(const std::string& path, const KeyValues& kv) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write config file " + path);
    f << kv_to_string(kv);
}

std::string kv_to_string(const KeyValues& kv) {
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
    return os.str();
}

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw ValidationError("config: learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("config: max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("config: patience must be >= 1");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
        throw ValidationError("config: warmup_fraction must be in [0,1)");
    if (weight_decay < 0.0) throw ValidationError("config: weight_decay must be >= 0");
}

ModelConfig model_config_from_kv(const KeyValues& kv, ModelConfig base, bool ignore_foreign) {
    for (const auto& [k, v] : kv) {
        if (k == "d_model") base.d_model = to_long(k, v);
        else if (k == "n_heads") base.n_heads = to_long(k, v);
        else if (k == "n_enc_layers") base.n_enc_layers = to_long(k, v);
        else if (k == "n_dec_layers") base.n_dec_layers = to_long(k, v);
        else if (k == "d_ff") base.d_ff = to_long(k, v);
        else if (k == "vocab_size") base.vocab_size = to_long(k, v);
        else if (k == "max_source_len") base.max_source_len = to_long(k, v);
        else if (k == "max_target_len") base.max_target_len = to_long(k, v);
        else if (k == "dropout_rate") base.dropout_rate = to_double(k, v);
        else if (!ignore_foreign)
            throw ValidationError("config: unknown model key '" + k + "'");
    }
    return base;
}

TrainConfig train_config_from_kv(const KeyValues& kv, TrainConfig base, bool ignore_foreign) {
    for (const auto& [k, v] : kv) {
        if (k == "learning_rate") base.learning_rate = to_double(k, v);
        else if (k == "batch_size") base.batch_size = to_long(k, v);
        else if (k == "max_epochs") base.max_epochs = to_long(k, v);
        else if (k == "patience") base.patience = to_long(k, v);
        else if (k == "warmup_fraction") base.warmup_fraction = to_double(k, v);
        else if (k == "weight_decay") base.weight_decay = to_double(k, v);
        else if (!ignore_foreign)
            throw ValidationError("config: unknown train key '" + k + "'");
    }
    return base;
}

void check_known_keys(const KeyValues& kv) {
    for (const auto& [k, _] : kv)
        if (!kModelKeys.count(k) && !kTrainKeys.count(k))
            throw ValidationError("config: unknown key '" + k + "'");
}

KeyValues model_config_to_kv(const ModelConfig& cfg) {
    KeyValues kv;
    kv["d_model"] = std::to_string(cfg.d_model);
    kv["n_heads"] = std::to_string(cfg.n_heads);
    kv["n_enc_layers"] = std::to_string(cfg.n_enc_layers);
    kv["n_dec_layers"] = std::to_string(cfg.n_dec_layers);
    kv["d_ff"] = std::to_string(cfg.d_ff);
    kv["vocab_size"] = std::to_string(cfg.vocab_size);
    kv["max_source_len"] = std::to_string(cfg.max_source_len);
    kv["max_target_len"] = std::to_string(cfg.max_target_len);
    std::ostringstream d;
    d << cfg.dropout_rate;
    kv["dropout_rate"] = d.str();
    return kv;
}

KeyValues train_config_to_kv(const TrainConfig& cfg) {
    KeyValues kv;
    std::ostringstream lr, wf, wd;
    lr << cfg.learning_rate;
    wf << cfg.warmup_fraction;
    wd << cfg.weight_decay;
    kv["learning_rate"] = lr.str();
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["max_epochs"] = std::to_string(cfg.max_epochs);
    kv["patience"] = std::to_string(cfg.patience);
    kv["warmup_fraction"] = wf.str();
    kv["weight_decay"] = wd.str();
    return kv;
}

std::string config_hash(const KeyValues& kv) {
    const std::string text = kv_to_string(kv);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace genmc
