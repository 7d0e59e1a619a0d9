#pragma once

#include <memory>
#include <string>

#include "intentspan/model.hpp"
#include "intentspan/train.hpp"

namespace intentspan {

inline constexpr int kCheckpointFormatVersion = 1;

/// FNV-1a over the vocab tokens (with separators); guards checkpoints
/// against silently swapped vocabularies.
std::uint64_t vocab_hash(const Vocab& vocab);

/// Single JSON file holding configs, vocab, taxonomy, and every
/// parameter in registration order. Doubles survive the round trip
/// bit-identically.
void save_checkpoint(const Model<double>& model, const Taxonomy& taxonomy,
                     std::uint64_t train_seed, std::size_t epoch, const std::string& path);

struct LoadedCheckpoint {
  std::unique_ptr<Model<double>> model;
  std::unique_ptr<Taxonomy> taxonomy;
  std::uint64_t train_seed = 0;
  std::size_t epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace intentspan
