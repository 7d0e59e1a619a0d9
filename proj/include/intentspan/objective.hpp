#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "intentspan/model.hpp"

namespace intentspan {

/// Gold targets for one slot with labels resolved to class indices.
struct GoldSlot {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t coarse_idx = 0;
  std::size_t fine_idx = 0;
};

/// Resolves an example's triplets against the model's label spaces.
/// Slot order is the example's slot order (primary first).
inline std::vector<GoldSlot> gold_slots(const MultiIntentExample& example,
                                        const std::vector<std::string>& coarse_names,
                                        const std::vector<std::string>& fine_names) {
  auto index_of = [](const std::vector<std::string>& names, const std::string& label) {
    auto it = std::find(names.begin(), names.end(), label);
    if (it == names.end())
      throw ValidationError("loss: label '" + label + "' is not in the model's label space");
    return static_cast<std::size_t>(it - names.begin());
  };
  std::vector<GoldSlot> out;
  for (const auto& t : example.triplets)
    out.push_back({t.start, t.end, index_of(coarse_names, t.coarse),
                   index_of(fine_names, t.fine)});
  return out;
}

template <typename Scalar>
struct LossBreakdown {
  Scalar l_primary = 0;
  Scalar l_non_primary = 0;
  Scalar l_span = 0;
  Scalar total = 0;
};

enum class SlotGroup { kPrimary, kNonPrimary };

namespace detail {

template <typename Scalar>
Scalar clamped_log(Scalar p, Scalar eps) {
  return std::log(std::max(p, eps));
}

template <typename Scalar>
void check_gold(const ModelOutput<Scalar>& output, const std::vector<GoldSlot>& gold) {
  if (output.steps.empty()) throw ValidationError("loss: output has no decode steps");
  if (gold.size() != output.steps[0].slots.size())
    throw ValidationError("loss: example has " + std::to_string(gold.size()) +
                          " gold slots but the model emitted " +
                          std::to_string(output.steps[0].slots.size()));
  for (const auto& s : gold) {
    if (s.start >= output.mask.size() || s.end >= output.mask.size())
      throw ValidationError("loss: gold position out of range");
    if (!output.mask[s.start] || !output.mask[s.end])
      throw ValidationError("loss: gold position " +
                            std::to_string(output.mask[s.start] ? s.end : s.start) +
                            " falls on a masked index");
    const auto& slot0 = output.steps[0].slots[0];
    if (s.coarse_idx >= static_cast<std::size_t>(slot0.coarse.size()) ||
        s.fine_idx >= static_cast<std::size_t>(slot0.fine.size()))
      throw ValidationError("loss: gold label index out of range");
  }
}

}  // namespace detail

/// Mean over batch and decode steps of -log p(coarse) - log p(fine) for
/// the chosen slot group (slot 0, or the sum over slots >= 1).
template <typename Scalar>
Scalar intent_loss(const std::vector<ModelOutput<Scalar>>& outputs,
                   const std::vector<std::vector<GoldSlot>>& golds, SlotGroup group,
                   Scalar eps = Scalar(1e-12)) {
  if (outputs.size() != golds.size() || outputs.empty())
    throw ValidationError("loss: batch sizes do not match or are empty");
  Scalar total = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    detail::check_gold(outputs[i], golds[i]);
    Scalar per_example = 0;
    for (const auto& step : outputs[i].steps) {
      for (std::size_t k = 0; k < step.slots.size(); ++k) {
        const bool primary_slot = k == 0;
        if ((group == SlotGroup::kPrimary) != primary_slot) continue;
        const auto& gold = golds[i][k];
        // Grouped per slot and scaled by 1/steps so the result matches the
        // graph-built loss bit for bit.
        per_example +=
            -detail::clamped_log(
                step.slots[k].coarse(static_cast<Eigen::Index>(gold.coarse_idx)), eps) -
            detail::clamped_log(
                step.slots[k].fine(static_cast<Eigen::Index>(gold.fine_idx)), eps);
      }
    }
    total += per_example * (Scalar(1) / Scalar(outputs[i].steps.size()));
  }
  return total / Scalar(outputs.size());
}

/// Mean over batch and decode steps of -sum_slots [log p_start(gold) +
/// log p_end(gold)].
template <typename Scalar>
Scalar span_loss(const std::vector<ModelOutput<Scalar>>& outputs,
                 const std::vector<std::vector<GoldSlot>>& golds,
                 Scalar eps = Scalar(1e-12)) {
  if (outputs.size() != golds.size() || outputs.empty())
    throw ValidationError("loss: batch sizes do not match or are empty");
  Scalar total = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    detail::check_gold(outputs[i], golds[i]);
    Scalar per_example = 0;
    for (const auto& step : outputs[i].steps) {
      for (std::size_t k = 0; k < step.slots.size(); ++k) {
        const auto& gold = golds[i][k];
        per_example +=
            -detail::clamped_log(
                step.slots[k].start(static_cast<Eigen::Index>(gold.start)), eps) -
            detail::clamped_log(
                step.slots[k].end(static_cast<Eigen::Index>(gold.end)), eps);
      }
    }
    total += per_example * (Scalar(1) / Scalar(outputs[i].steps.size()));
  }
  return total / Scalar(outputs.size());
}

/// Assembles the three components; total is the training objective.
template <typename Scalar>
LossBreakdown<Scalar> total_loss(const std::vector<ModelOutput<Scalar>>& outputs,
                                 const std::vector<std::vector<GoldSlot>>& golds,
                                 Scalar eps = Scalar(1e-12)) {
  LossBreakdown<Scalar> out;
  out.l_primary = intent_loss(outputs, golds, SlotGroup::kPrimary, eps);
  out.l_non_primary =
      outputs[0].steps[0].slots.size() > 1
          ? intent_loss(outputs, golds, SlotGroup::kNonPrimary, eps)
          : Scalar(0);
  out.l_span = span_loss(outputs, golds, eps);
  out.total = out.l_primary + out.l_non_primary + out.l_span;
  return out;
}

/// Single-example convenience overload.
template <typename Scalar>
LossBreakdown<Scalar> total_loss(const ModelOutput<Scalar>& output,
                                 const MultiIntentExample& example,
                                 const std::vector<std::string>& coarse_names,
                                 const std::vector<std::string>& fine_names,
                                 Scalar eps = Scalar(1e-12)) {
  return total_loss(std::vector<ModelOutput<Scalar>>{output},
                    std::vector<std::vector<GoldSlot>>{
                        gold_slots(example, coarse_names, fine_names)},
                    eps);
}

/// Loss nodes for one example's built graph; used by the trainer so
/// gradients flow. Mirrors the value-level functions exactly: same
/// clamping, same step averaging, same accumulation order.
template <typename Scalar>
struct LossNodes {
  int primary = -1;
  int non_primary = -1;
  int span = -1;
  int total = -1;
};

template <typename Scalar>
LossNodes<Scalar> build_example_loss(Graph<Scalar>& g,
                                     const typename Model<Scalar>::BuildResult& built,
                                     const std::vector<GoldSlot>& gold,
                                     Scalar eps = Scalar(1e-12)) {
  if (built.steps.empty()) throw ValidationError("loss: built graph has no decode steps");
  if (gold.size() != built.steps[0].slots.size())
    throw ValidationError("loss: gold slot count does not match decoder slots");

  auto real_index = [&](std::size_t padded_pos) {
    for (std::size_t k = 0; k < built.seq.positions.size(); ++k)
      if (built.seq.positions[k] == padded_pos) return static_cast<Eigen::Index>(k);
    throw ValidationError("loss: gold position " + std::to_string(padded_pos) +
                          " falls on a masked index");
  };

  const Scalar inv_steps = Scalar(1) / Scalar(built.steps.size());
  int primary = -1, non_primary = -1, span = -1;
  auto accumulate = [&](int& acc, int node) { acc = acc < 0 ? node : g.add(acc, node); };
  auto nll_term = [&](int dist, Eigen::Index idx) {
    return g.scale(g.pick(g.log_clamped(dist, eps), idx), Scalar(-1));
  };

  for (const auto& step : built.steps) {
    for (std::size_t k = 0; k < step.slots.size(); ++k) {
      const auto& slot = step.slots[k];
      int label_term =
          g.add(nll_term(slot.coarse, static_cast<Eigen::Index>(gold[k].coarse_idx)),
                nll_term(slot.fine, static_cast<Eigen::Index>(gold[k].fine_idx)));
      accumulate(k == 0 ? primary : non_primary, label_term);
      accumulate(span, g.add(nll_term(slot.start, real_index(gold[k].start)),
                             nll_term(slot.end, real_index(gold[k].end))));
    }
  }

  LossNodes<Scalar> out;
  out.primary = g.scale(primary, inv_steps);
  out.non_primary = non_primary < 0 ? g.input(Mat<Scalar>::Zero(1, 1))
                                    : g.scale(non_primary, inv_steps);
  out.span = g.scale(span, inv_steps);
  out.total = g.add(g.add(out.primary, out.non_primary), out.span);
  return out;
}

}  // namespace intentspan
