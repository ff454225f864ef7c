#pragma once

#include <memory>
#include <string>

#include "model.hpp"

namespace genmc {

// Checkpoint directory layout:
//   model.txt    kind + architecture key-values
//   vocab.txt    one token per line, reserved ids first
//   weights.bin  text manifest (name, shape, byte offset) followed by raw
//                little-endian float64 payload; round-trips bit-exactly
// The token-clue pipeline nests stage1/ and stage2/ checkpoints instead of
// a weights file of its own.

void save_checkpoint(const std::string& dir, const Model& model, const Vocab& vocab);

struct LoadedModel {
    std::unique_ptr<Model> model;
    Vocab vocab;
};

LoadedModel load_checkpoint(const std::string& dir);

// raw tensor payload I/O, exposed for the round-trip tests
void write_weights_file(const std::string& path, const ParamList& params);
void read_weights_file(const std::string& path, const ParamList& params);

}  // namespace genmc
