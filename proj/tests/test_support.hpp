#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "intentspan/corpus.hpp"
#include "intentspan/model.hpp"
#include "intentspan/taxonomy.hpp"

namespace testsupport {

/// Small smart-home taxonomy shared across tests: 3 coarse, 6 fine.
inline intentspan::Taxonomy home_taxonomy() {
  return intentspan::Taxonomy(
      "home", {{"lights", {"lamp_on", "lamp_off"}},
               {"music", {"play_song", "stop_song"}},
               {"timer", {"timer_set", "timer_cancel"}}});
}

/// 3 coarse / 4 fine variant for tiny classifier heads.
inline intentspan::Taxonomy small_taxonomy() {
  return intentspan::Taxonomy("small", {{"lights", {"lamp_on", "lamp_off"}},
                                        {"music", {"play_song"}},
                                        {"timer", {"timer_set"}}});
}

struct ToyModelOptions {
  std::size_t n_slots = 2;
  std::size_t n_steps = 1;
  bool contextual = false;
  bool sum_tuple_history = true;
  double dropout = 0.0;
  std::uint64_t seed = 99;
};

inline intentspan::Vocab toy_vocab() {
  intentspan::Vocab v;
  v.index_to_token = {"<pad>", "<unk>", "turn", "on", "the", "lamp",
                      "play",  "jazz",  "set",  "a",  "timer"};
  for (std::size_t i = 0; i < v.index_to_token.size(); ++i)
    v.token_to_index[v.index_to_token[i]] = i;
  return v;
}

/// Tiny model at the gradcheck dims: D_e = D_h = D_H = 4, C_c = 3, C_f = 4.
inline intentspan::Model<double> toy_model(const ToyModelOptions& opt = {}) {
  intentspan::EncoderConfig enc;
  enc.vocab_size = toy_vocab().size();
  enc.embed_dim = 4;
  enc.contextual = opt.contextual;
  enc.dropout_rate = opt.dropout;

  intentspan::DecoderConfig dec;
  dec.hidden_dim = 4;
  dec.pointer_hidden = 4;
  dec.n_slots = opt.n_slots;
  dec.n_steps = opt.n_steps;
  dec.dropout_rate = opt.dropout;
  dec.sum_tuple_history = opt.sum_tuple_history;

  return intentspan::Model<double>(enc, dec, toy_vocab(), small_taxonomy(), opt.seed);
}

inline intentspan::Param<double>& find_param(intentspan::ParamStore<double>& store,
                                             const std::string& name) {
  for (auto& p : store.all())
    if (p.name == name) return p;
  throw std::runtime_error("no param named " + name);
}

inline intentspan::Utterance utt(std::string text, std::string fine,
                                 bool primary = false) {
  intentspan::Utterance u;
  u.text = std::move(text);
  u.fine_intent = std::move(fine);
  u.language = intentspan::Language::kEn;
  u.primary = primary;
  return u;
}

/// Unique temp path; removed by the caller or left for the OS to clean.
inline std::string temp_path(const std::string& stem) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path();
  return (dir / (stem + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++))).string();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testsupport
