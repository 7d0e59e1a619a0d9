#include "intentspan/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace intentspan {

double span_overlap(std::size_t pred_start, std::size_t pred_end, std::size_t gold_start,
                    std::size_t gold_end) {
  if (pred_end < pred_start || gold_end < gold_start)
    throw ValidationError("span_overlap: span end before start");
  const std::size_t lo = std::max(pred_start, gold_start);
  const std::size_t hi = std::min(pred_end, gold_end);
  const std::size_t inter = hi >= lo ? hi - lo + 1 : 0;
  const std::size_t len_pred = pred_end - pred_start + 1;
  const std::size_t len_gold = gold_end - gold_start + 1;
  return static_cast<double>(inter) / static_cast<double>(len_pred + len_gold - inter);
}

double macro_f1(const std::vector<std::string>& preds, const std::vector<std::string>& golds,
                const std::vector<std::string>& label_space) {
  if (preds.size() != golds.size())
    throw ValidationError("macro_f1: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(golds.size()) + " golds");
  if (label_space.empty()) throw ValidationError("macro_f1: empty label space");

  double sum = 0.0;
  for (const auto& label : label_space) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == label;
      const bool g = golds[i] == label;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    const double precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / static_cast<double>(label_space.size());
}

namespace {

void check_labels(const std::vector<IntentSpanTriplet>& triplets,
                  const std::vector<std::string>& coarse_space,
                  const std::vector<std::string>& fine_space, const std::string& who) {
  for (const auto& t : triplets) {
    if (std::find(coarse_space.begin(), coarse_space.end(), t.coarse) == coarse_space.end())
      throw ValidationError("eval: " + who + " coarse label '" + t.coarse +
                            "' is not in the model's label space");
    if (std::find(fine_space.begin(), fine_space.end(), t.fine) == fine_space.end())
      throw ValidationError("eval: " + who + " fine label '" + t.fine +
                            "' is not in the model's label space");
  }
}

std::string threshold_key(double th) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", th);
  return buf;
}

}  // namespace

MetricsReport score_predictions(const std::vector<ScoredExample>& examples,
                                const std::vector<std::string>& coarse_space,
                                const std::vector<std::string>& fine_space,
                                const std::vector<double>& thresholds) {
  if (examples.empty()) throw ValidationError("eval: nothing to score");
  for (const auto& th : thresholds)
    if (th < 0.0 || th > 1.0)
      throw ValidationError("eval: threshold " + std::to_string(th) + " outside [0,1]");
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
    for (std::size_t j = i + 1; j < thresholds.size(); ++j)
      if (threshold_key(thresholds[i]) == threshold_key(thresholds[j]))
        throw ValidationError("eval: thresholds " + std::to_string(thresholds[i]) + " and " +
                              std::to_string(thresholds[j]) +
                              " collide at two-decimal precision");

  // Slot-aligned label pairs, pooled per view.
  std::vector<std::string> coarse_pred_p, coarse_gold_p, fine_pred_p, fine_gold_p;
  std::vector<std::string> coarse_pred_a, coarse_gold_a, fine_pred_a, fine_gold_a;
  std::size_t coarse_hits_p = 0, fine_hits_p = 0, coarse_hits_a = 0, fine_hits_a = 0;
  std::vector<std::size_t> gated_hits_p(thresholds.size(), 0);
  std::vector<std::size_t> gated_hits_a(thresholds.size(), 0);
  std::size_t slot_pairs = 0;

  for (const auto& ex : examples) {
    if (ex.pred.size() != ex.gold.size() || ex.pred.empty())
      throw ValidationError("eval: example has " + std::to_string(ex.pred.size()) +
                            " predicted slots vs " + std::to_string(ex.gold.size()) +
                            " gold slots");
    check_labels(ex.pred, coarse_space, fine_space, "predicted");
    check_labels(ex.gold, coarse_space, fine_space, "gold");

    for (std::size_t k = 0; k < ex.pred.size(); ++k) {
      const auto& p = ex.pred[k];
      const auto& g = ex.gold[k];
      const bool coarse_ok = p.coarse == g.coarse;
      const bool fine_ok = p.fine == g.fine;
      const double overlap = span_overlap(p.start, p.end, g.start, g.end);

      ++slot_pairs;
      coarse_hits_a += coarse_ok;
      fine_hits_a += fine_ok;
      coarse_pred_a.push_back(p.coarse);
      coarse_gold_a.push_back(g.coarse);
      fine_pred_a.push_back(p.fine);
      fine_gold_a.push_back(g.fine);
      if (k == 0) {
        coarse_hits_p += coarse_ok;
        fine_hits_p += fine_ok;
        coarse_pred_p.push_back(p.coarse);
        coarse_gold_p.push_back(g.coarse);
        fine_pred_p.push_back(p.fine);
        fine_gold_p.push_back(g.fine);
      }
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const bool gated = coarse_ok && fine_ok && overlap >= thresholds[t];
        gated_hits_a[t] += gated;
        if (k == 0) gated_hits_p[t] += gated;
      }
    }
  }

  const double n = static_cast<double>(examples.size());
  const double pairs = static_cast<double>(slot_pairs);

  MetricsReport report;
  report.coarse_primary = {double(coarse_hits_p) / n,
                           macro_f1(coarse_pred_p, coarse_gold_p, coarse_space)};
  report.coarse_average = {double(coarse_hits_a) / pairs,
                           macro_f1(coarse_pred_a, coarse_gold_a, coarse_space)};
  report.fine_primary = {double(fine_hits_p) / n,
                         macro_f1(fine_pred_p, fine_gold_p, fine_space)};
  report.fine_average = {double(fine_hits_a) / pairs,
                         macro_f1(fine_pred_a, fine_gold_a, fine_space)};
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    report.thresholded.emplace_back(
        thresholds[t], ThresholdRow{double(gated_hits_p[t]) / n, double(gated_hits_a[t]) / pairs});
  return report;
}

MetricsReport evaluate(const Model<double>& model, const DatasetSplit& split,
                       const std::vector<double>& thresholds) {
  if (split.examples.empty()) throw ValidationError("eval: split is empty");
  const std::size_t n_slots = model.decoder_config().n_slots;

  std::vector<ScoredExample> scored;
  scored.reserve(split.examples.size());
  for (const auto& example : split.examples) {
    if (example.triplets.size() != n_slots)
      throw ValidationError("eval: example '" + example.id + "' has " +
                            std::to_string(example.triplets.size()) +
                            " spans but the model decodes " + std::to_string(n_slots));
    auto out = model.forward(model.lookup_tokens(example.tokens));
    ScoredExample se;
    se.pred.assign(out.decoded.begin(),
                   out.decoded.begin() + static_cast<std::ptrdiff_t>(n_slots));
    se.gold = example.triplets;
    scored.push_back(std::move(se));
  }
  return score_predictions(scored, model.coarse_names(), model.fine_names(), thresholds);
}

std::string render_report(const MetricsReport& report) {
  using nlohmann::ordered_json;
  auto view = [](const ViewMetrics& m) {
    return ordered_json{{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}};
  };
  ordered_json doc;
  doc["granularity"] = {
      {"coarse",
       {{"primary", view(report.coarse_primary)}, {"average", view(report.coarse_average)}}},
      {"fine",
       {{"primary", view(report.fine_primary)}, {"average", view(report.fine_average)}}}};
  doc["thresholded"] = ordered_json::object();
  for (const auto& [th, row] : report.thresholded)
    doc["thresholded"][threshold_key(th)] =
        ordered_json{{"primary", row.primary}, {"average", row.average}};
  return doc.dump(2) + "\n";
}

void render_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << render_report(report);
}

}  // namespace intentspan
