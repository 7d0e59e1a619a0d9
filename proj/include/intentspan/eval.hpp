#pragma once

#include <string>
#include <vector>

#include "intentspan/model.hpp"

namespace intentspan {

/// Jaccard similarity of the two token-index sets covered by inclusive
/// spans: |pred ∩ gold| / |pred ∪ gold|.
double span_overlap(std::size_t pred_start, std::size_t pred_end, std::size_t gold_start,
                    std::size_t gold_end);

/// Unweighted mean over `label_space` of per-label F1. Labels with a zero
/// precision+recall denominator (including labels that never occur)
/// contribute 0.
double macro_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                const std::vector<std::string>& label_space);

struct ViewMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct ThresholdRow {
  double primary = 0.0;
  double average = 0.0;
};

/// Metrics per granularity (coarse/fine label) and view (primary = slot 0
/// only, average = all slots), plus span-gated accuracies per threshold.
struct MetricsReport {
  ViewMetrics coarse_primary;
  ViewMetrics coarse_average;
  ViewMetrics fine_primary;
  ViewMetrics fine_average;
  /// (threshold, accuracies), in the caller's threshold order.
  std::vector<std::pair<double, ThresholdRow>> thresholded;
};

/// One example's slot-aligned predictions: pred[k] is scored against
/// gold[k], no re-matching.
struct ScoredExample {
  std::vector<IntentSpanTriplet> pred;
  std::vector<IntentSpanTriplet> gold;
};

/// Pure scoring over already-decoded predictions.
/// Accuracy counts label matches; the thresholded variant additionally
/// requires both labels to match and span_overlap >= threshold.
MetricsReport score_predictions(const std::vector<ScoredExample>& examples,
                                const std::vector<std::string>& coarse_space,
                                const std::vector<std::string>& fine_space,
                                const std::vector<double>& thresholds);

/// Runs the model over the split and scores the first decode step's slots
/// against each example's gold triplets.
MetricsReport evaluate(const Model<double>& model, const DatasetSplit& split,
                       const std::vector<double>& thresholds);

/// Fixed-schema JSON: {"granularity": {"coarse": {"primary": {"accuracy":
/// ..., "macro_f1": ...}, ...}, ...}, "thresholded": {"0.50": {"primary":
/// ..., "average": ...}, ...}}. Threshold keys use two decimals; the
/// "thresholded" object is present even when empty.
std::string render_report(const MetricsReport& report);
void render_report(const MetricsReport& report, const std::string& path);

}  // namespace intentspan
