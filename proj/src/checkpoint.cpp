#include "checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "baselines.hpp"
#include "config.hpp"

namespace genmc {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "genmc-weights v1";

void write_le64(std::ostream& out, std::uint64_t bits) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t read_le64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("weights file truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return bits;
}

}  // namespace

void write_weights_file(const std::string& path, const ParamList& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write weights file " + path);
    std::ostringstream header;
    header << kMagic << "\n";
    std::uint64_t offset = 0;
    for (const auto& p : params) {
        header << "tensor " << p.name << " " << p.tensor.rank();
        for (long d : p.tensor.shape()) header << " " << d;
        header << " " << offset << "\n";
        offset += static_cast<std::uint64_t>(p.tensor.numel()) * 8;
    }
    header << "end\n";
    f << header.str();
    for (const auto& p : params)
        for (double v : p.tensor.data()) write_le64(f, std::bit_cast<std::uint64_t>(v));
    if (!f) throw IoError("failed while writing weights file " + path);
}

void read_weights_file(const std::string& path, const ParamList& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open weights file " + path);
    std::string line;
    if (!std::getline(f, line) || line != kMagic)
        throw ValidationError("weights file " + path + ": bad magic line");
    struct Entry {
        std::vector<long> shape;
        std::uint64_t offset;
    };
    std::map<std::string, Entry> manifest;
    while (std::getline(f, line)) {
        if (line == "end") break;
        std::istringstream is(line);
        std::string word, name;
        long rank = 0;
        if (!(is >> word >> name >> rank) || word != "tensor" || rank < 1 || rank > 2)
            throw ValidationError("weights file " + path + ": malformed manifest line '" + line +
                                  "'");
        Entry e;
        for (long i = 0; i < rank; ++i) {
            long d = 0;
            if (!(is >> d) || d < 0)
                throw ValidationError("weights file " + path + ": bad shape for " + name);
            e.shape.push_back(d);
        }
        if (!(is >> e.offset))
            throw ValidationError("weights file " + path + ": missing offset for " + name);
        if (!manifest.emplace(name, std::move(e)).second)
            throw ValidationError("weights file " + path + ": duplicate tensor " + name);
    }
    if (line != "end") throw ValidationError("weights file " + path + ": manifest not terminated");
    const std::streampos data_start = f.tellg();
    for (const auto& p : params) {
        auto it = manifest.find(p.name);
        if (it == manifest.end())
            throw ValidationError("weights file " + path + ": missing tensor " + p.name);
        if (it->second.shape != p.tensor.shape())
            throw ValidationError("weights file " + path + ": shape mismatch for " + p.name);
        f.seekg(data_start + static_cast<std::streamoff>(it->second.offset));
        for (double& v : const_cast<Tensor&>(p.tensor).data())
            v = std::bit_cast<double>(read_le64(f));
        manifest.erase(it);
    }
    if (!manifest.empty())
        throw ValidationError("weights file " + path + ": unknown tensor " +
                              manifest.begin()->first);
}

namespace {

void save_single(const std::string& dir, const Model& model, const Vocab& vocab) {
    fs::create_directories(dir);
    KeyValues kv = model_config_to_kv(model.config());
    kv["kind"] = to_string(model.kind());
    write_kv_file(dir + "/model.txt", kv);
    vocab.save(dir + "/vocab.txt");
    write_weights_file(dir + "/weights.bin", model.parameters());
}

}  // namespace

void save_checkpoint(const std::string& dir, const Model& model, const Vocab& vocab) {
    if (model.kind() == ModelKind::TOKEN_CLUE) {
        const auto& composite = dynamic_cast<const TokenClueModel&>(model);
        fs::create_directories(dir);
        KeyValues kv = model_config_to_kv(model.config());
        kv["kind"] = to_string(model.kind());
        write_kv_file(dir + "/model.txt", kv);
        vocab.save(dir + "/vocab.txt");
        save_single(dir + "/stage1", composite.generator(), vocab);
        save_single(dir + "/stage2", composite.reader(), vocab);
        return;
    }
    save_single(dir, model, vocab);
}

LoadedModel load_checkpoint(const std::string& dir) {
    if (!fs::exists(dir + "/model.txt"))
        throw IoError("no checkpoint at " + dir + " (model.txt missing)");
    KeyValues kv = parse_kv_file(dir + "/model.txt");
    auto kind_it = kv.find("kind");
    if (kind_it == kv.end())
        throw ValidationError("checkpoint " + dir + ": model.txt lacks a kind");
    const ModelKind kind = model_kind_from_string(kind_it->second);
    const ModelConfig cfg = model_config_from_kv(kv, ModelConfig{});

    LoadedModel out;
    out.vocab = Vocab::load(dir + "/vocab.txt");
    if (kind == ModelKind::TOKEN_CLUE) {
        if (!fs::exists(dir + "/stage1/model.txt"))
            throw IoError("token-clue checkpoint " + dir + " lacks its stage-1 generator");
        if (!fs::exists(dir + "/stage2/model.txt"))
            throw IoError("token-clue checkpoint " + dir + " lacks its stage-2 reader");
        LoadedModel stage1 = load_checkpoint(dir + "/stage1");
        LoadedModel stage2 = load_checkpoint(dir + "/stage2");
        auto* gen = dynamic_cast<ClueGeneratorModel*>(stage1.model.get());
        auto* reader = dynamic_cast<T2TEncModel*>(stage2.model.get());
        if (!gen || !reader)
            throw ValidationError("token-clue checkpoint " + dir + ": stage kinds are wrong");
        stage1.model.release();
        stage2.model.release();
        out.model = std::make_unique<TokenClueModel>(std::unique_ptr<ClueGeneratorModel>(gen),
                                                     std::unique_ptr<T2TEncModel>(reader));
        return out;
    }
    out.model = make_model(kind, cfg, /*seed=*/0);
    read_weights_file(dir + "/weights.bin", out.model->parameters());
    return out;
}

}  // namespace genmc
