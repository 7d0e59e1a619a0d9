#pragma once

#include <string>
#include <vector>

#include "intentspan/decoder.hpp"
#include "intentspan/taxonomy.hpp"

namespace intentspan {

/// Encoder + pointer decoder + label spaces + vocab: everything needed
/// to map a token-id sequence to span/label distributions.
template <typename Scalar>
class Model {
 public:
  Model(const EncoderConfig& enc_cfg, DecoderConfig dec_cfg, Vocab vocab,
        const Taxonomy& taxonomy, std::uint64_t init_seed)
      : vocab_(std::move(vocab)),
        coarse_names_(taxonomy.coarse_labels()),
        fine_names_(taxonomy.fine_labels()),
        init_seed_(init_seed) {
    dec_cfg.coarse_count = coarse_names_.size();
    dec_cfg.fine_count = fine_names_.size();
    std::mt19937_64 rng(init_seed);
    encoder_.emplace(enc_cfg, store_, rng);
    decoder_.emplace(dec_cfg, enc_cfg.embed_dim, store_, rng);
  }

  const Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& coarse_names() const { return coarse_names_; }
  const std::vector<std::string>& fine_names() const { return fine_names_; }
  const EncoderConfig& encoder_config() const { return encoder_->config(); }
  const DecoderConfig& decoder_config() const { return decoder_->config(); }
  std::uint64_t init_seed() const { return init_seed_; }
  ParamStore<Scalar>& params() { return store_; }
  const ParamStore<Scalar>& params() const { return store_; }
  const BaselineEncoder<Scalar>& encoder() const { return *encoder_; }
  const PointerDecoder<Scalar>& decoder() const { return *decoder_; }

  std::vector<std::size_t> lookup_tokens(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab_.lookup(t));
    return ids;
  }

  struct BuildResult {
    EncodedSequence seq;
    std::vector<typename PointerDecoder<Scalar>::StepNodes> steps;
  };

  /// Builds the full differentiable pipeline on `g`. `gold` non-null
  /// switches tuple pooling to teacher forcing; gold positions are in
  /// padded-sentence coordinates and must land on real tokens.
  BuildResult build(Graph<Scalar>& g, const std::vector<std::size_t>& token_ids,
                    std::mt19937_64& rng, bool training,
                    const std::vector<IntentSpanTriplet>* gold) const {
    BuildResult out;
    out.seq = encoder_->encode_nodes(g, token_ids, rng, training);
    if (out.seq.token_cols.empty())
      throw ValidationError("model: sentence has no real tokens");

    std::vector<GoldSpanReal> gold_real;
    if (gold) {
      if (gold->size() != decoder_->config().n_slots)
        throw ValidationError("model: example has " + std::to_string(gold->size()) +
                              " spans but the decoder has " +
                              std::to_string(decoder_->config().n_slots) + " slots");
      for (const auto& t : *gold)
        gold_real.push_back({real_index(out.seq, t.start), real_index(out.seq, t.end)});
    }

    auto session = decoder_->open_session(g);
    for (std::size_t t = 0; t < decoder_->config().n_steps; ++t)
      out.steps.push_back(decoder_->run_step(g, out.seq.token_cols, session,
                                             gold ? &gold_real : nullptr, rng, training));
    return out;
  }

  /// Inference: deterministic, no dropout, no gold. Distributions are
  /// scattered back to padded-sentence length with exact zeros on pads.
  ModelOutput<Scalar> forward(const std::vector<std::size_t>& token_ids) const {
    Graph<Scalar> g;
    std::mt19937_64 rng(0);  // unused: dropout is off outside training
    BuildResult built = build(g, token_ids, rng, false, nullptr);

    ModelOutput<Scalar> out;
    out.mask.assign(token_ids.size(), false);
    for (std::size_t pos : built.seq.positions) out.mask[pos] = true;

    for (const auto& step_nodes : built.steps) {
      StepOutput<Scalar> step;
      for (const auto& slot_nodes : step_nodes.slots) {
        SlotDistributions<Scalar> slot;
        slot.start = scatter(g.value(slot_nodes.start), built.seq);
        slot.end = scatter(g.value(slot_nodes.end), built.seq);
        slot.coarse = g.value(slot_nodes.coarse).col(0);
        slot.fine = g.value(slot_nodes.fine).col(0);
        step.slots.push_back(std::move(slot));
      }
      out.steps.push_back(std::move(step));
    }

    for (std::size_t t = 0; t < out.steps.size(); ++t) {
      auto triplets = decode_greedy(out.steps[t], out.mask, coarse_names_, fine_names_);
      if (t > 0)
        for (auto& tr : triplets) tr.primary = false;
      out.decoded.insert(out.decoded.end(), triplets.begin(), triplets.end());
    }
    return out;
  }

  ModelOutput<Scalar> forward_tokens(const std::vector<std::string>& tokens) const {
    return forward(lookup_tokens(tokens));
  }

 private:
  static Eigen::Index real_index(const EncodedSequence& seq, std::size_t padded_pos) {
    for (std::size_t k = 0; k < seq.positions.size(); ++k)
      if (seq.positions[k] == padded_pos) return static_cast<Eigen::Index>(k);
    throw ValidationError("model: gold position " + std::to_string(padded_pos) +
                          " falls on a masked or out-of-range index");
  }

  Vec<Scalar> scatter(const Mat<Scalar>& real_dist, const EncodedSequence& seq) const {
    Vec<Scalar> padded = Vec<Scalar>::Zero(static_cast<Eigen::Index>(seq.total_length));
    for (std::size_t k = 0; k < seq.positions.size(); ++k)
      padded(static_cast<Eigen::Index>(seq.positions[k])) =
          real_dist(static_cast<Eigen::Index>(k), 0);
    return padded;
  }

  ParamStore<Scalar> store_;
  Vocab vocab_;
  std::vector<std::string> coarse_names_;
  std::vector<std::string> fine_names_;
  std::uint64_t init_seed_ = 0;
  std::optional<BaselineEncoder<Scalar>> encoder_;
  std::optional<PointerDecoder<Scalar>> decoder_;
};

}  // namespace intentspan
