#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

// Scalar-arithmetic reference implementations, written with plain loops
// and no Eigen, for checking the graph-based versions against.
namespace oracle {

inline std::vector<double> softmax(const std::vector<double>& x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  std::vector<double> e(x.size());
  double z = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(x[i] - m);
    z += e[i];
  }
  for (double& v : e) v /= z;
  return e;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One LSTM step with gates packed [i, f, o, g] in W rows over [x ; h].
/// W is (4H) x (X+H) in row-major nested vectors.
struct LstmStepResult {
  std::vector<double> h;
  std::vector<double> c;
};

inline LstmStepResult lstm_step(const std::vector<std::vector<double>>& W,
                                const std::vector<double>& b,
                                const std::vector<double>& x,
                                const std::vector<double>& h_prev,
                                const std::vector<double>& c_prev) {
  const std::size_t H = h_prev.size();
  std::vector<double> in(x);
  in.insert(in.end(), h_prev.begin(), h_prev.end());
  std::vector<double> z(4 * H, 0.0);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    for (std::size_t c = 0; c < in.size(); ++c) z[r] += W[r][c] * in[c];
    z[r] += b[r];
  }
  LstmStepResult out;
  out.h.resize(H);
  out.c.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    double gi = sigmoid(z[k]);
    double gf = sigmoid(z[H + k]);
    double go = sigmoid(z[2 * H + k]);
    double gc = std::tanh(z[3 * H + k]);
    out.c[k] = gf * c_prev[k] + gi * gc;
    out.h[k] = go * std::tanh(out.c[k]);
  }
  return out;
}

/// Additive attention weights over token columns V (each inner vector is
/// one token's encoding): e_j = v . tanh(Wh h + Wt t + Wv V_j).
inline std::vector<double> attention_weights(
    const std::vector<std::vector<double>>& Wh, const std::vector<std::vector<double>>& Wt,
    const std::vector<std::vector<double>>& Wv, const std::vector<double>& v,
    const std::vector<double>& h, const std::vector<double>& t,
    const std::vector<std::vector<double>>& tokens) {
  auto matvec = [](const std::vector<std::vector<double>>& M, const std::vector<double>& x) {
    std::vector<double> y(M.size(), 0.0);
    for (std::size_t r = 0; r < M.size(); ++r)
      for (std::size_t c = 0; c < x.size(); ++c) y[r] += M[r][c] * x[c];
    return y;
  };
  std::vector<double> base = matvec(Wh, h);
  std::vector<double> tb = matvec(Wt, t);
  for (std::size_t r = 0; r < base.size(); ++r) base[r] += tb[r];
  std::vector<double> scores;
  for (const auto& tok : tokens) {
    std::vector<double> s = matvec(Wv, tok);
    double e = 0;
    for (std::size_t r = 0; r < s.size(); ++r) e += v[r] * std::tanh(base[r] + s[r]);
    scores.push_back(e);
  }
  return softmax(scores);
}

/// Mean over examples of -log p[gold], probabilities clamped at eps.
inline double nll(const std::vector<std::vector<double>>& dists,
                  const std::vector<std::size_t>& gold, double eps = 1e-12) {
  double total = 0;
  for (std::size_t i = 0; i < dists.size(); ++i)
    total += -std::log(std::max(dists[i][gold[i]], eps));
  return total / static_cast<double>(dists.size());
}

}  // namespace oracle
