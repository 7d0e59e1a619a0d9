#pragma once

#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "intentspan/graph.hpp"

namespace intentspan {

enum class InitKind { kZero, kUniformSmall, kGlorot };

/// Owns every trainable parameter of a model in registration order.
/// Checkpointing walks `all()` in that order, so construction order is
/// part of the on-disk format.
template <typename Scalar>
class ParamStore {
 public:
  Param<Scalar>& create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        InitKind kind, std::mt19937_64& rng) {
    Mat<Scalar> value(rows, cols);
    switch (kind) {
      case InitKind::kZero:
        value.setZero();
        break;
      case InitKind::kUniformSmall:
        fill_uniform(value, Scalar(0.1), rng);
        break;
      case InitKind::kGlorot: {
        Scalar limit = std::sqrt(Scalar(6) / Scalar(rows + cols));
        fill_uniform(value, limit, rng);
        break;
      }
    }
    params_.emplace_back(name, std::move(value));
    return params_.back();
  }

  std::deque<Param<Scalar>>& all() { return params_; }
  const std::deque<Param<Scalar>>& all() const { return params_; }

  std::size_t count() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

 private:
  static void fill_uniform(Mat<Scalar>& m, Scalar limit, std::mt19937_64& rng) {
    // 53-bit mantissa draw mapped to [-limit, limit); independent of any
    // standard-library distribution implementation.
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        m(r, c) = Scalar((2.0 * u - 1.0) * static_cast<double>(limit));
      }
  }

  std::deque<Param<Scalar>> params_;
};

/// Affine layer y = Wx + b applied to column vectors or per-column to
/// matrices.
template <typename Scalar>
struct Dense {
  Param<Scalar>* weight = nullptr;
  Param<Scalar>* bias = nullptr;

  static Dense create(ParamStore<Scalar>& store, const std::string& name,
                      Eigen::Index out_dim, Eigen::Index in_dim, std::mt19937_64& rng) {
    Dense d;
    d.weight = &store.create(name + ".W", out_dim, in_dim, InitKind::kGlorot, rng);
    d.bias = &store.create(name + ".b", out_dim, 1, InitKind::kZero, rng);
    return d;
  }

  int apply(Graph<Scalar>& g, int x) const {
    return g.affine(g.param(*weight), x, g.param(*bias));
  }
};

/// Single LSTM cell; gates packed as [input, forget, output, candidate]
/// rows of one weight matrix over [x ; h_prev].
template <typename Scalar>
struct LstmCell {
  Param<Scalar>* weight = nullptr;
  Param<Scalar>* bias = nullptr;
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 0;

  static LstmCell create(ParamStore<Scalar>& store, const std::string& name,
                         Eigen::Index input_dim, Eigen::Index hidden_dim,
                         std::mt19937_64& rng) {
    LstmCell cell;
    cell.input_dim = input_dim;
    cell.hidden_dim = hidden_dim;
    cell.weight = &store.create(name + ".W", 4 * hidden_dim, input_dim + hidden_dim,
                                InitKind::kGlorot, rng);
    cell.bias = &store.create(name + ".b", 4 * hidden_dim, 1, InitKind::kZero, rng);
    return cell;
  }

  struct State {
    int h = -1;
    int c = -1;
  };

  State initial(Graph<Scalar>& g) const {
    State s;
    s.h = g.input(Mat<Scalar>::Zero(hidden_dim, 1));
    s.c = g.input(Mat<Scalar>::Zero(hidden_dim, 1));
    return s;
  }

  State step(Graph<Scalar>& g, int x, State prev) const {
    const Eigen::Index h = hidden_dim;
    int z = g.affine(g.param(*weight), g.vconcat({x, prev.h}), g.param(*bias));
    int gate_i = g.sigmoid(g.rows(z, 0, h));
    int gate_f = g.sigmoid(g.rows(z, h, h));
    int gate_o = g.sigmoid(g.rows(z, 2 * h, h));
    int cand = g.tanh(g.rows(z, 3 * h, h));
    State next;
    next.c = g.add(g.cmul(gate_f, prev.c), g.cmul(gate_i, cand));
    next.h = g.cmul(gate_o, g.tanh(next.c));
    return next;
  }
};

/// Bidirectional LSTM over a token sequence given as per-token column
/// nodes. Output j is [h_fwd_j ; h_bwd_j], so 2*hidden_dim rows.
template <typename Scalar>
struct BiLstm {
  LstmCell<Scalar> forward;
  LstmCell<Scalar> backward;

  static BiLstm create(ParamStore<Scalar>& store, const std::string& name,
                       Eigen::Index input_dim, Eigen::Index hidden_dim,
                       std::mt19937_64& rng) {
    BiLstm b;
    b.forward = LstmCell<Scalar>::create(store, name + ".fwd", input_dim, hidden_dim, rng);
    b.backward = LstmCell<Scalar>::create(store, name + ".bwd", input_dim, hidden_dim, rng);
    return b;
  }

  std::vector<int> apply(Graph<Scalar>& g, const std::vector<int>& xs) const {
    const std::size_t n = xs.size();
    std::vector<int> fwd(n), bwd(n);
    auto state = forward.initial(g);
    for (std::size_t j = 0; j < n; ++j) {
      state = forward.step(g, xs[j], state);
      fwd[j] = state.h;
    }
    state = backward.initial(g);
    for (std::size_t j = n; j-- > 0;) {
      state = backward.step(g, xs[j], state);
      bwd[j] = state.h;
    }
    std::vector<int> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = g.vconcat({fwd[j], bwd[j]});
    return out;
  }
};

}  // namespace intentspan
