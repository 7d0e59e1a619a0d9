#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intentspan/corpus.hpp"
#include "intentspan/layers.hpp"

namespace intentspan {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  Eigen::Index embed_dim = 0;  // D_e
  bool contextual = false;     // adds a bidirectional recurrent layer
  double dropout_rate = 0.0;
};

/// Per-token encoding V^E with a padding mask (true = real token).
template <typename Scalar>
struct TokenEncoding {
  Mat<Scalar> vectors;  // n_tokens x D_e
  std::vector<bool> mask;
};

/// encode_nodes output: one graph node per *real* token (pads are never
/// encoded), plus where those tokens sit in the padded sentence.
struct EncodedSequence {
  std::vector<int> token_cols;          // column nodes, D_e x 1 each
  std::vector<std::size_t> positions;   // original index of each real token
  std::size_t total_length = 0;         // includes pads
};

/// Trainable baseline encoder: embedding lookup plus an optional
/// bidirectional recurrent layer whose output dimension is again D_e
/// (D_e/2 per direction), so the decoder never sees the difference.
template <typename Scalar>
class BaselineEncoder {
 public:
  BaselineEncoder(const EncoderConfig& config, ParamStore<Scalar>& store,
                  std::mt19937_64& rng)
      : config_(config) {
    if (config.vocab_size == 0) throw ValidationError("encoder: vocab_size must be > 0");
    if (config.embed_dim <= 0) throw ValidationError("encoder: embed_dim must be > 0");
    if (config.dropout_rate < 0 || config.dropout_rate >= 1)
      throw ValidationError("encoder: dropout_rate must lie in [0,1)");
    if (config.contextual && config.embed_dim % 2 != 0)
      throw ValidationError("encoder: contextual mode needs an even embed_dim");
    embedding_ = &store.create("encoder.embedding", config.embed_dim,
                               static_cast<Eigen::Index>(config.vocab_size),
                               InitKind::kUniformSmall, rng);
    if (config.contextual)
      context_ = BiLstm<Scalar>::create(store, "encoder.context", config.embed_dim,
                                        config.embed_dim / 2, rng);
  }

  const EncoderConfig& config() const { return config_; }

  /// Builds encoding nodes for the real tokens of a (possibly padded)
  /// sentence. Pads (id 0) are skipped entirely: they are not embedded
  /// and never reach the recurrent layer.
  EncodedSequence encode_nodes(Graph<Scalar>& g, const std::vector<std::size_t>& token_ids,
                               std::mt19937_64& rng, bool training) const {
    EncodedSequence seq;
    seq.total_length = token_ids.size();
    int emb = g.param(*embedding_);
    for (std::size_t j = 0; j < token_ids.size(); ++j) {
      if (token_ids[j] >= config_.vocab_size)
        throw ValidationError("encoder: token index " + std::to_string(token_ids[j]) +
                              " out of range for vocab of " +
                              std::to_string(config_.vocab_size));
      if (token_ids[j] == Vocab::kPad) continue;
      int v = g.col(emb, static_cast<Eigen::Index>(token_ids[j]));
      seq.token_cols.push_back(g.dropout(v, Scalar(config_.dropout_rate), rng, training));
      seq.positions.push_back(j);
    }
    if (context_ && !seq.token_cols.empty()) {
      seq.token_cols = context_->apply(g, seq.token_cols);
      for (int& node : seq.token_cols)
        node = g.dropout(node, Scalar(config_.dropout_rate), rng, training);
    }
    return seq;
  }

  /// Value-level encoding; rows at padded positions are zero.
  TokenEncoding<Scalar> encode(const std::vector<std::size_t>& token_ids,
                               std::mt19937_64& rng, bool training) const {
    Graph<Scalar> g;
    EncodedSequence seq = encode_nodes(g, token_ids, rng, training);
    TokenEncoding<Scalar> out;
    out.vectors = Mat<Scalar>::Zero(static_cast<Eigen::Index>(token_ids.size()),
                                    config_.embed_dim);
    out.mask.assign(token_ids.size(), false);
    for (std::size_t k = 0; k < seq.token_cols.size(); ++k) {
      out.vectors.row(static_cast<Eigen::Index>(seq.positions[k])) =
          g.value(seq.token_cols[k]).transpose();
      out.mask[seq.positions[k]] = true;
    }
    return out;
  }

 private:
  EncoderConfig config_;
  Param<Scalar>* embedding_ = nullptr;
  std::optional<BiLstm<Scalar>> context_;
};

/// Contract for plugging in an external contextual encoder (a pretrained
/// transformer, say). Implementations may subword-tokenize internally
/// but must return exactly one row per whitespace token.
class TokenVectorProvider {
 public:
  virtual ~TokenVectorProvider() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual Mat<double> encode(const std::vector<std::string>& tokens) = 0;
};

/// Mean-pools subword rows back to one row per whitespace token.
/// `groups[t]` lists the subword row indices of token t.
Mat<double> mean_pool_subwords(const Mat<double>& subword_vectors,
                               const std::vector<std::vector<std::size_t>>& groups);

/// Process-wide adapter registry, keyed by name.
void register_token_vector_provider(
    const std::string& name, std::function<std::shared_ptr<TokenVectorProvider>()> factory);
bool has_token_vector_provider(const std::string& name);
std::shared_ptr<TokenVectorProvider> make_token_vector_provider(const std::string& name);

/// Runs raw whitespace tokens through a registered provider and checks
/// the one-row-per-token contract.
TokenEncoding<double> adapter_encode(const std::vector<std::string>& raw_tokens,
                                     const std::string& provider_name);

}  // namespace intentspan
