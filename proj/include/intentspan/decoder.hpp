#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "intentspan/encoder.hpp"

namespace intentspan {

struct DecoderConfig {
  Eigen::Index hidden_dim = 0;      // D_h, sequence-generator LSTM
  Eigen::Index pointer_hidden = 0;  // D_H, per direction in pointer blocks
  std::size_t n_slots = 2;          // N spans per step
  std::size_t n_steps = 1;          // T decode steps per sentence
  std::size_t coarse_count = 0;     // C_c
  std::size_t fine_count = 0;       // C_f
  double dropout_rate = 0.0;
  /// true: the generator consumes the running sum of emitted tuple
  /// vectors; false: just the previous one.
  bool sum_tuple_history = true;
};

/// Value-level distributions for one slot. start/end cover the padded
/// sentence; padded positions are exactly 0.
template <typename Scalar>
struct SlotDistributions {
  Vec<Scalar> start;
  Vec<Scalar> end;
  Vec<Scalar> coarse;
  Vec<Scalar> fine;
};

template <typename Scalar>
struct StepOutput {
  std::vector<SlotDistributions<Scalar>> slots;
};

template <typename Scalar>
struct ModelOutput {
  std::vector<StepOutput<Scalar>> steps;
  std::vector<IntentSpanTriplet> decoded;
  std::vector<bool> mask;
};

/// Gold span positions for one slot, as indices into the *real* token
/// subsequence; used for teacher-forced tuple pooling.
struct GoldSpanReal {
  Eigen::Index start = 0;
  Eigen::Index end = 0;
};

/// Pointer-network decoder: additive attention over token encodings, an
/// LSTM sequence generator, N chained bidirectional pointer blocks with
/// start/end heads, and per-slot intent classifiers.
template <typename Scalar>
class PointerDecoder {
 public:
  PointerDecoder(const DecoderConfig& config, Eigen::Index encoding_dim,
                 ParamStore<Scalar>& store, std::mt19937_64& rng)
      : cfg_(config), enc_dim_(encoding_dim) {
    if (cfg_.hidden_dim <= 0 || cfg_.pointer_hidden <= 0)
      throw ValidationError("decoder: hidden dims must be > 0");
    if (cfg_.n_slots < 1 || cfg_.n_steps < 1)
      throw ValidationError("decoder: n_slots and n_steps must be >= 1");
    if (cfg_.coarse_count < 1 || cfg_.fine_count < 1)
      throw ValidationError("decoder: label counts must be >= 1");
    if (cfg_.dropout_rate < 0 || cfg_.dropout_rate >= 1)
      throw ValidationError("decoder: dropout_rate must lie in [0,1)");

    const Eigen::Index attn = cfg_.hidden_dim;
    attn_h_ = &store.create("decoder.attn.Wh", attn, cfg_.hidden_dim, InitKind::kGlorot, rng);
    attn_t_ = &store.create("decoder.attn.Wt", attn, tuple_dim(), InitKind::kGlorot, rng);
    attn_v_ = &store.create("decoder.attn.Wv", attn, enc_dim_, InitKind::kGlorot, rng);
    attn_score_ = &store.create("decoder.attn.v", 1, attn, InitKind::kGlorot, rng);

    generator_ = LstmCell<Scalar>::create(store, "decoder.generator",
                                          enc_dim_ + tuple_dim(), cfg_.hidden_dim, rng);

    for (std::size_t k = 0; k < cfg_.n_slots; ++k) {
      const std::string base = "decoder.block" + std::to_string(k);
      const Eigen::Index in_dim = k == 0 ? cfg_.hidden_dim + enc_dim_
                                         : 2 * cfg_.pointer_hidden + cfg_.hidden_dim + enc_dim_;
      blocks_.push_back(BiLstm<Scalar>::create(store, base, in_dim, cfg_.pointer_hidden, rng));
      start_heads_.push_back(
          Dense<Scalar>::create(store, base + ".start", 1, 2 * cfg_.pointer_hidden, rng));
      end_heads_.push_back(
          Dense<Scalar>::create(store, base + ".end", 1, 2 * cfg_.pointer_hidden, rng));
    }
    for (std::size_t k = 0; k < cfg_.n_slots; ++k) {
      const std::string base = "decoder.intent" + std::to_string(k);
      const Eigen::Index in_dim = tuple_dim() + cfg_.hidden_dim;
      coarse_heads_.push_back(Dense<Scalar>::create(
          store, base + ".coarse", static_cast<Eigen::Index>(cfg_.coarse_count), in_dim, rng));
      fine_heads_.push_back(Dense<Scalar>::create(
          store, base + ".fine", static_cast<Eigen::Index>(cfg_.fine_count), in_dim, rng));
    }
  }

  const DecoderConfig& config() const { return cfg_; }
  Eigen::Index encoding_dim() const { return enc_dim_; }

  /// One span vector is [start-pooled h^m ; end-pooled h^m]; a tuple
  /// stacks one per slot.
  Eigen::Index tuple_dim() const {
    return static_cast<Eigen::Index>(cfg_.n_slots) * 4 * cfg_.pointer_hidden;
  }

  /// Running sum of previously emitted tuple vectors (zero when empty).
  int accumulate_tuple(Graph<Scalar>& g, const std::vector<int>& history) const {
    if (history.empty()) return g.input(Mat<Scalar>::Zero(tuple_dim(), 1));
    int acc = history[0];
    for (std::size_t i = 1; i < history.size(); ++i) acc = g.add(acc, history[i]);
    return acc;
  }

  struct AttendNodes {
    int weights = -1;  // L x 1 over real positions
    int context = -1;  // encoding_dim x 1
  };

  /// Additive attention: e_j = v . tanh(Wh h_prev + Wt tup_prev + Wv V_j),
  /// softmaxed over the real positions. With no emitted tuples yet,
  /// tup_prev is zero and the Wt term vanishes.
  AttendNodes attend(Graph<Scalar>& g, int h_prev, int tup_prev,
                     const std::vector<int>& token_cols) const {
    if (token_cols.empty()) throw ValidationError("attend: no unmasked positions");
    int base = g.add(g.matmul(g.param(*attn_h_), h_prev), g.matmul(g.param(*attn_t_), tup_prev));
    int enc = g.hconcat(token_cols);
    int proj = g.tanh(g.colwise_add(g.matmul(g.param(*attn_v_), enc), base));
    int scores = g.matmul(g.param(*attn_score_), proj);
    AttendNodes out;
    out.weights = g.softmax(g.transpose(scores));
    out.context = g.matmul(enc, out.weights);
    return out;
  }

  using State = typename LstmCell<Scalar>::State;

  State initial_state(Graph<Scalar>& g) const { return generator_.initial(g); }

  /// h_i^D = LSTM([a^E ; tup_prev], previous state).
  State generator_step(Graph<Scalar>& g, int context, int tup_prev, State state) const {
    return generator_.step(g, g.vconcat({context, tup_prev}), state);
  }

  struct PointerNodes {
    int hidden_matrix = -1;  // 2*D_H x L
    int start = -1;          // L x 1 distribution over real positions
    int end = -1;
  };

  /// Bidirectional pass over per-token inputs followed by the two
  /// affine+softmax position heads.
  PointerNodes pointer_block(Graph<Scalar>& g, std::size_t slot,
                             const std::vector<int>& input_cols, std::mt19937_64& rng,
                             bool training) const {
    if (input_cols.empty()) throw ValidationError("pointer_block: no unmasked positions");
    auto hidden = blocks_.at(slot).apply(g, input_cols);
    PointerNodes out;
    out.hidden_matrix =
        g.dropout(g.hconcat(hidden), Scalar(cfg_.dropout_rate), rng, training);
    out.start = g.softmax(g.transpose(start_heads_[slot].apply(g, out.hidden_matrix)));
    out.end = g.softmax(g.transpose(end_heads_[slot].apply(g, out.hidden_matrix)));
    return out;
  }

  /// [sum_j w_start_j h^m_j ; sum_j w_end_j h^m_j].
  int span_vector(Graph<Scalar>& g, int hidden_matrix, int start_weights,
                  int end_weights) const {
    return g.vconcat({g.matmul(hidden_matrix, start_weights),
                      g.matmul(hidden_matrix, end_weights)});
  }

  /// Per-slot (coarse, fine) softmax nodes over [tup ; h^D].
  std::vector<std::pair<int, int>> classify_intents(Graph<Scalar>& g, int tup,
                                                    int h_state) const {
    int in = g.vconcat({tup, h_state});
    std::vector<std::pair<int, int>> out;
    for (std::size_t k = 0; k < cfg_.n_slots; ++k)
      out.emplace_back(g.softmax(coarse_heads_[k].apply(g, in)),
                       g.softmax(fine_heads_[k].apply(g, in)));
    return out;
  }

  struct SlotNodes {
    int start = -1;   // L x 1 over real positions
    int end = -1;
    int coarse = -1;  // C_c x 1
    int fine = -1;    // C_f x 1
  };

  struct StepNodes {
    std::vector<SlotNodes> slots;
    int tuple = -1;
    int h_state = -1;
  };

  struct Session {
    State state;
    std::vector<int> history;
  };

  Session open_session(Graph<Scalar>& g) const { return {initial_state(g), {}}; }

  /// One full decode step over the encoded real tokens. When `gold` is
  /// given (teacher forcing), tuple pooling uses one-hot weights at the
  /// gold positions instead of the predicted distributions.
  StepNodes run_step(Graph<Scalar>& g, const std::vector<int>& token_cols, Session& session,
                     const std::vector<GoldSpanReal>* gold, std::mt19937_64& rng,
                     bool training) const {
    if (gold && gold->size() != cfg_.n_slots)
      throw ValidationError("decoder: gold slot count does not match n_slots");
    const Eigen::Index L = static_cast<Eigen::Index>(token_cols.size());

    int hist = cfg_.sum_tuple_history
                   ? accumulate_tuple(g, session.history)
                   : (session.history.empty() ? accumulate_tuple(g, {})
                                              : session.history.back());
    auto att = attend(g, session.state.h, hist, token_cols);
    session.state = generator_step(g, att.context, hist, session.state);
    int h_state =
        g.dropout(session.state.h, Scalar(cfg_.dropout_rate), rng, training);

    StepNodes step;
    step.h_state = h_state;
    std::vector<int> span_vectors;
    int prev_hidden_matrix = -1;

    for (std::size_t k = 0; k < cfg_.n_slots; ++k) {
      std::vector<int> inputs(token_cols.size());
      for (std::size_t j = 0; j < token_cols.size(); ++j) {
        if (k == 0)
          inputs[j] = g.vconcat({h_state, token_cols[j]});
        else
          inputs[j] = g.vconcat({g.col(prev_hidden_matrix, static_cast<Eigen::Index>(j)),
                                 h_state, token_cols[j]});
      }
      auto ptr = pointer_block(g, k, inputs, rng, training);

      int w_start = ptr.start;
      int w_end = ptr.end;
      if (gold) {
        w_start = g.input(one_hot(L, (*gold)[k].start));
        w_end = g.input(one_hot(L, (*gold)[k].end));
      }
      span_vectors.push_back(span_vector(g, ptr.hidden_matrix, w_start, w_end));

      SlotNodes slot;
      slot.start = ptr.start;
      slot.end = ptr.end;
      step.slots.push_back(slot);
      prev_hidden_matrix = ptr.hidden_matrix;
    }

    step.tuple = g.vconcat(span_vectors);
    auto intents = classify_intents(g, step.tuple, h_state);
    for (std::size_t k = 0; k < cfg_.n_slots; ++k) {
      step.slots[k].coarse = intents[k].first;
      step.slots[k].fine = intents[k].second;
    }
    session.history.push_back(step.tuple);
    return step;
  }

 private:
  static Mat<Scalar> one_hot(Eigen::Index n, Eigen::Index i) {
    Mat<Scalar> v = Mat<Scalar>::Zero(n, 1);
    if (i < 0 || i >= n) throw ValidationError("decoder: gold position out of range");
    v(i, 0) = Scalar(1);
    return v;
  }

  DecoderConfig cfg_;
  Eigen::Index enc_dim_ = 0;
  Param<Scalar>* attn_h_ = nullptr;
  Param<Scalar>* attn_t_ = nullptr;
  Param<Scalar>* attn_v_ = nullptr;
  Param<Scalar>* attn_score_ = nullptr;
  LstmCell<Scalar> generator_;
  std::vector<BiLstm<Scalar>> blocks_;
  std::vector<Dense<Scalar>> start_heads_;
  std::vector<Dense<Scalar>> end_heads_;
  std::vector<Dense<Scalar>> coarse_heads_;
  std::vector<Dense<Scalar>> fine_heads_;
};

/// Greedy span-and-label decode for one step's distributions. Ties pick
/// the lowest index; the end argmax is restricted to real positions at
/// or after the chosen start. Slot 0 is labeled primary.
template <typename Scalar>
std::vector<IntentSpanTriplet> decode_greedy(const StepOutput<Scalar>& step,
                                             const std::vector<bool>& mask,
                                             const std::vector<std::string>& coarse_names,
                                             const std::vector<std::string>& fine_names) {
  std::vector<IntentSpanTriplet> out;
  for (std::size_t k = 0; k < step.slots.size(); ++k) {
    const auto& slot = step.slots[k];
    Eigen::Index st = -1, en = -1;
    for (Eigen::Index j = 0; j < slot.start.size(); ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      if (st < 0 || slot.start(j) > slot.start(st)) st = j;
    }
    if (st < 0) throw ValidationError("decode: all positions masked");
    for (Eigen::Index j = st; j < slot.end.size(); ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      if (en < 0 || slot.end(j) > slot.end(en)) en = j;
    }

    Eigen::Index ci = 0, fi = 0;
    for (Eigen::Index c = 1; c < slot.coarse.size(); ++c)
      if (slot.coarse(c) > slot.coarse(ci)) ci = c;
    for (Eigen::Index f = 1; f < slot.fine.size(); ++f)
      if (slot.fine(f) > slot.fine(fi)) fi = f;

    IntentSpanTriplet t;
    t.start = static_cast<std::size_t>(st);
    t.end = static_cast<std::size_t>(en);
    t.coarse = coarse_names.at(static_cast<std::size_t>(ci));
    t.fine = fine_names.at(static_cast<std::size_t>(fi));
    t.primary = k == 0;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace intentspan
