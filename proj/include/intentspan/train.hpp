#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "intentspan/objective.hpp"

namespace intentspan {

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 1e-5;
  double dropout_rate = 0.5;  // recorded here; applied via the model configs
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  // Adam moment constants; fixed, not tunable.
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  void validate() const {
    if (learning_rate <= 0) throw ValidationError("train: learning_rate must be > 0");
    if (weight_decay < 0) throw ValidationError("train: weight_decay must be >= 0");
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  }
};

/// Adam with L2 regularization folded into the gradient. step() consumes
/// and zeroes the accumulated parameter gradients.
template <typename Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore<Scalar>& store, Scalar learning_rate, Scalar weight_decay)
      : store_(store), lr_(learning_rate), wd_(weight_decay) {
    for (auto& p : store.all()) {
      m_.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void step() {
    ++t_;
    const Scalar b1 = Scalar(TrainConfig::kBeta1);
    const Scalar b2 = Scalar(TrainConfig::kBeta2);
    const Scalar eps = Scalar(TrainConfig::kEpsilon);
    const Scalar bias1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar bias2 = Scalar(1) - std::pow(b2, Scalar(t_));
    std::size_t i = 0;
    for (auto& p : store_.all()) {
      Mat<Scalar> grad = p.grad + wd_ * p.value;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * grad.cwiseProduct(grad);
      Mat<Scalar> m_hat = m_[i] / bias1;
      Mat<Scalar> v_hat = v_[i] / bias2;
      p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps);
      p.grad.setZero();
      ++i;
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  ParamStore<Scalar>& store_;
  Scalar lr_;
  Scalar wd_;
  std::size_t t_ = 0;
  std::vector<Mat<Scalar>> m_;
  std::vector<Mat<Scalar>> v_;
};

template <typename Scalar>
struct EpochLosses {
  std::size_t epoch = 0;  // 1-based
  Scalar train_total = 0;
  Scalar train_primary = 0;
  Scalar train_non_primary = 0;
  Scalar train_span = 0;
  Scalar dev_total = 0;
};

template <typename Scalar>
using LossCurve = std::vector<EpochLosses<Scalar>>;

template <typename Scalar>
struct TrainResult {
  LossCurve<Scalar> curve;
  std::size_t best_epoch = 0;  // 1-based, lowest dev total
  Scalar best_dev = 0;
};

/// Mean dev loss of the current parameters (inference mode, predicted
/// pooling, no dropout).
template <typename Scalar>
Scalar dev_loss(const Model<Scalar>& model, const DatasetSplit& split) {
  if (split.examples.empty()) throw ValidationError("train: dev split is empty");
  Scalar total = 0;
  for (const auto& example : split.examples) {
    ModelOutput<Scalar> out = model.forward(model.lookup_tokens(example.tokens));
    total += total_loss(out, example, model.coarse_names(), model.fine_names()).total;
  }
  return total / Scalar(split.examples.size());
}

/// Teacher-forced training; leaves the model holding the parameters of
/// the epoch with the lowest dev loss.
template <typename Scalar>
TrainResult<Scalar> train(Model<Scalar>& model, const DatasetSplit& train_split,
                          const DatasetSplit& dev_split, const TrainConfig& cfg) {
  cfg.validate();
  if (train_split.examples.empty()) throw ValidationError("train: train split is empty");
  for (const auto& example : train_split.examples)
    if (example.triplets.size() != model.decoder_config().n_slots)
      throw ValidationError("train: example '" + example.id + "' has " +
                            std::to_string(example.triplets.size()) +
                            " spans but the decoder has " +
                            std::to_string(model.decoder_config().n_slots) + " slots");

  AdamOptimizer<Scalar> optimizer(model.params(), Scalar(cfg.learning_rate),
                                  Scalar(cfg.weight_decay));
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed + 0x9e3779b97f4a7c15ull);

  const std::size_t n = train_split.examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<std::vector<GoldSlot>> golds;
  std::vector<std::vector<std::size_t>> token_ids;
  for (const auto& example : train_split.examples) {
    golds.push_back(gold_slots(example, model.coarse_names(), model.fine_names()));
    token_ids.push_back(model.lookup_tokens(example.tokens));
  }

  TrainResult<Scalar> result;
  std::vector<Mat<Scalar>> best_params;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(shuffle_rng, i));
      std::swap(order[i - 1], order[j]);
    }

    LossBreakdown<Scalar> epoch_sum;
    std::size_t batch_id = 0;
    for (std::size_t at = 0; at < n; at += cfg.batch_size, ++batch_id) {
      const std::size_t batch_end = std::min(at + cfg.batch_size, n);
      const Scalar inv_batch = Scalar(1) / Scalar(batch_end - at);

      std::size_t max_len = 0;
      for (std::size_t b = at; b < batch_end; ++b)
        max_len = std::max(max_len, token_ids[order[b]].size());

      LossBreakdown<Scalar> batch_sum;
      for (std::size_t b = at; b < batch_end; ++b) {
        const std::size_t idx = order[b];
        std::vector<std::size_t> padded = token_ids[idx];
        padded.resize(max_len, Vocab::kPad);

        Graph<Scalar> g;
        auto built = model.build(g, padded, dropout_rng, true,
                                 &train_split.examples[idx].triplets);
        auto loss = build_example_loss(g, built, golds[idx]);
        g.backward(g.scale(loss.total, inv_batch));

        batch_sum.l_primary += g.value(loss.primary)(0, 0);
        batch_sum.l_non_primary += g.value(loss.non_primary)(0, 0);
        batch_sum.l_span += g.value(loss.span)(0, 0);
        batch_sum.total += g.value(loss.total)(0, 0);
      }

      if (!std::isfinite(static_cast<double>(batch_sum.total)))
        throw NumericError(
            "train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
            std::to_string(batch_id) + " (primary=" + std::to_string(batch_sum.l_primary) +
            ", non_primary=" + std::to_string(batch_sum.l_non_primary) +
            ", span=" + std::to_string(batch_sum.l_span) + ")");

      optimizer.step();
      epoch_sum.l_primary += batch_sum.l_primary;
      epoch_sum.l_non_primary += batch_sum.l_non_primary;
      epoch_sum.l_span += batch_sum.l_span;
      epoch_sum.total += batch_sum.total;
    }

    EpochLosses<Scalar> row;
    row.epoch = epoch;
    row.train_total = epoch_sum.total / Scalar(n);
    row.train_primary = epoch_sum.l_primary / Scalar(n);
    row.train_non_primary = epoch_sum.l_non_primary / Scalar(n);
    row.train_span = epoch_sum.l_span / Scalar(n);
    row.dev_total = dev_loss(model, dev_split);
    result.curve.push_back(row);

    if (result.best_epoch == 0 || row.dev_total < result.best_dev) {
      result.best_epoch = epoch;
      result.best_dev = row.dev_total;
      best_params.clear();
      for (const auto& p : model.params().all()) best_params.push_back(p.value);
    }
  }

  std::size_t i = 0;
  for (auto& p : model.params().all()) p.value = best_params[i++];
  return result;
}

/// CSV loss curve; the header line is part of the format contract.
template <typename Scalar>
void emit_loss_curve(const LossCurve<Scalar>& curve, const std::string& path) {
  if (curve.empty()) throw ValidationError("loss curve is empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "epoch,train_total,train_primary,train_non_primary,train_span,dev_total\n";
  char buf[512];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                  static_cast<double>(row.train_total), static_cast<double>(row.train_primary),
                  static_cast<double>(row.train_non_primary),
                  static_cast<double>(row.train_span), static_cast<double>(row.dev_total));
    out << buf;
  }
}

}  // namespace intentspan
