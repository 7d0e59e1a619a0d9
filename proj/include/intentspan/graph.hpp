#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "intentspan/errors.hpp"

namespace intentspan {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A trainable dense parameter with a persistent gradient accumulator.
/// The optimizer owns zeroing and applying `grad`.
template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;

  Param() = default;
  Param(std::string n, Mat<Scalar> v)
      : name(std::move(n)), value(std::move(v)),
        grad(Mat<Scalar>::Zero(value.rows(), value.cols())) {}
};

/// Reverse-mode tape over dense Eigen matrices. One graph is built per
/// forward pass; backward() walks the tape once in reverse. Node handles
/// are plain ints valid for the lifetime of the graph.
template <typename Scalar>
class Graph {
 public:
  using Matrix = Mat<Scalar>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Constant leaf; no gradient flows out of it.
  int input(Matrix value) { return push(std::move(value), {}); }

  /// Trainable leaf; backward() adds its accumulated grad into p.grad.
  int param(Param<Scalar>& p) {
    int id = push(p.value, {});
    param_nodes_.emplace_back(id, &p);
    return id;
  }

  int add(int a, int b) {
    return push(value(a) + value(b), [this, a, b](const Matrix& g) {
      grad_of(a) += g;
      grad_of(b) += g;
    });
  }

  int sub(int a, int b) {
    return push(value(a) - value(b), [this, a, b](const Matrix& g) {
      grad_of(a) += g;
      grad_of(b) -= g;
    });
  }

  /// Elementwise product.
  int cmul(int a, int b) {
    return push(value(a).cwiseProduct(value(b)), [this, a, b](const Matrix& g) {
      grad_of(a) += g.cwiseProduct(value(b));
      grad_of(b) += g.cwiseProduct(value(a));
    });
  }

  int scale(int a, Scalar s) {
    return push(value(a) * s, [this, a, s](const Matrix& g) { grad_of(a) += g * s; });
  }

  int matmul(int a, int b) {
    return push(value(a) * value(b), [this, a, b](const Matrix& g) {
      grad_of(a) += g * value(b).transpose();
      grad_of(b) += value(a).transpose() * g;
    });
  }

  /// W*x + bias for column inputs; bias broadcasts over columns.
  int affine(int w, int x, int bias) { return colwise_add(matmul(w, x), bias); }

  /// Stacks nodes vertically; all must share the column count.
  int vconcat(const std::vector<int>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts.at(0)).cols();
    for (int p : parts) rows += value(p).rows();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      out.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    return push(std::move(out), [this, parts](const Matrix& g) {
      Eigen::Index at = 0;
      for (int p : parts) {
        grad_of(p) += g.middleRows(at, value(p).rows());
        at += value(p).rows();
      }
    });
  }

  /// Stacks nodes horizontally; all must share the row count.
  int hconcat(const std::vector<int>& parts) {
    Eigen::Index cols = 0;
    const Eigen::Index rows = value(parts.at(0)).rows();
    for (int p : parts) cols += value(p).cols();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (int p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    return push(std::move(out), [this, parts](const Matrix& g) {
      Eigen::Index at = 0;
      for (int p : parts) {
        grad_of(p) += g.middleCols(at, value(p).cols());
        at += value(p).cols();
      }
    });
  }

  /// Single column as a column-vector node.
  int col(int a, Eigen::Index j) {
    return push(value(a).col(j), [this, a, j](const Matrix& g) { grad_of(a).col(j) += g; });
  }

  /// Contiguous row block [start, start+len).
  int rows(int a, Eigen::Index start, Eigen::Index len) {
    return push(value(a).middleRows(start, len), [this, a, start, len](const Matrix& g) {
      grad_of(a).middleRows(start, len) += g;
    });
  }

  int transpose(int a) {
    return push(value(a).transpose(),
                [this, a](const Matrix& g) { grad_of(a) += g.transpose(); });
  }

  /// Replicates a column vector into an n-column matrix.
  int broadcast_col(int b, Eigen::Index n) {
    return push(value(b).replicate(1, n),
                [this, b](const Matrix& g) { grad_of(b) += g.rowwise().sum(); });
  }

  /// Adds column vector `b` to every column of `a`.
  int colwise_add(int a, int b) {
    Matrix out = value(a);
    out.colwise() += value(b).col(0);
    return push(std::move(out), [this, a, b](const Matrix& g) {
      grad_of(a) += g;
      grad_of(b) += g.rowwise().sum();
    });
  }

  int tanh(int a) {
    int id = push(value(a).array().tanh().matrix(), {});
    set_backprop(id, [this, a, id](const Matrix& g) {
      grad_of(a).array() += g.array() * (Scalar(1) - value(id).array().square());
    });
    return id;
  }

  int sigmoid(int a) {
    int id = push((Scalar(1) / (Scalar(1) + (-value(a).array()).exp())).matrix(), {});
    set_backprop(id, [this, a, id](const Matrix& g) {
      const Matrix& y = value(id);
      grad_of(a).array() += g.array() * y.array() * (Scalar(1) - y.array());
    });
    return id;
  }

  /// Numerically stable softmax of a column vector.
  int softmax(int a) {
    const Matrix& x = value(a);
    Eigen::Array<Scalar, Eigen::Dynamic, 1> shifted = x.col(0).array() - x.col(0).maxCoeff();
    Eigen::Array<Scalar, Eigen::Dynamic, 1> e = shifted.exp();
    int id = push((e / e.sum()).matrix(), {});
    set_backprop(id, [this, a, id](const Matrix& g) {
      const Matrix& p = value(id);
      Scalar dot = (p.array() * g.array()).sum();
      grad_of(a).array() += p.array() * (g.array() - dot);
    });
    return id;
  }

  /// Elementwise log(max(x, eps)); gradient is 0 where the clamp binds.
  /// Computed through std::log so scalar recomputations agree bitwise.
  int log_clamped(int a, Scalar eps) {
    Matrix y = value(a).unaryExpr(
        [eps](Scalar v) { return std::log(std::max(v, eps)); });
    return push(std::move(y), [this, a, eps](const Matrix& g) {
      const Matrix& x = value(a);
      grad_of(a).array() +=
          g.array() * (x.array() >= eps).template cast<Scalar>() / x.array().max(eps);
    });
  }

  /// Scalar (1x1) node holding coefficient i of a column vector.
  int pick(int a, Eigen::Index i) {
    Matrix out(1, 1);
    out(0, 0) = value(a)(i, 0);
    return push(std::move(out),
                [this, a, i](const Matrix& g) { grad_of(a)(i, 0) += g(0, 0); });
  }

  /// Inverted dropout: identity when not training or rate == 0.
  int dropout(int a, Scalar rate, std::mt19937_64& rng, bool training) {
    if (!training || rate == Scalar(0)) return a;
    const Matrix& x = value(a);
    Matrix mask(x.rows(), x.cols());
    const double keep = 1.0 - static_cast<double>(rate);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        // 53-bit uniform in [0,1)
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        mask(r, c) = u < keep ? Scalar(1.0 / keep) : Scalar(0);
      }
    Matrix out = x.cwiseProduct(mask);
    return push(std::move(out), [this, a, mask](const Matrix& g) {
      grad_of(a) += g.cwiseProduct(mask);
    });
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and walks the tape backwards, then flushes
  /// accumulated leaf gradients into their Params.
  void backward(int loss_id) {
    if (value(loss_id).rows() != 1 || value(loss_id).cols() != 1)
      throw NumericError("backward: loss node must be a 1x1 scalar");
    nodes_[static_cast<std::size_t>(loss_id)].grad(0, 0) = Scalar(1);
    for (int i = loss_id; i >= 0; --i) {
      Node& node = nodes_[static_cast<std::size_t>(i)];
      if (node.backprop && !node.grad.isZero(Scalar(0))) node.backprop(node.grad);
    }
    for (auto& [id, p] : param_nodes_) p->grad += grad(id);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(const Matrix&)> backprop;
  };

  int push(Matrix value, std::function<void(const Matrix&)> backprop) {
    Node node;
    node.grad = Matrix::Zero(value.rows(), value.cols());
    node.value = std::move(value);
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Matrix& grad_of(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  void set_backprop(int id, std::function<void(const Matrix&)> fn) {
    nodes_[static_cast<std::size_t>(id)].backprop = std::move(fn);
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param<Scalar>*>> param_nodes_;
};

}  // namespace intentspan
