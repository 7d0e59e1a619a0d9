// Acceptance gate: ten end-to-end checks over the shipped fixtures and
// the command-line binary. Prints one PASS/FAIL line per check and exits
// nonzero if any fail. Run from anywhere; paths are compiled in.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "intentspan/checkpoint.hpp"
#include "intentspan/corpus.hpp"
#include "intentspan/eval.hpp"
#include "intentspan/model.hpp"
#include "intentspan/objective.hpp"
#include "intentspan/taxonomy.hpp"
#include "intentspan/train.hpp"

#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace intentspan;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%2d] %-34s %s%s%s\n", idx, name.c_str(), pass ? "PASS" : "FAIL",
              detail.empty() ? "" : "  ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <typename Fn>
void criterion(int idx, const std::string& name, Fn fn) {
  try {
    auto [pass, detail] = fn();
    report(idx, name, pass, detail);
  } catch (const std::exception& e) {
    report(idx, name, false, std::string("exception: ") + e.what());
  }
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string data_path(const std::string& rel) {
  return (fs::path(ACCEPTANCE_DATA_DIR) / rel).string();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- gradient checks -------------------------------------------------------

gradcheck::Report whole_model_gradcheck(std::size_t n_slots) {
  testsupport::ToyModelOptions opt;
  opt.n_slots = n_slots;
  auto model = testsupport::toy_model(opt);

  MultiIntentExample ex;
  ex.id = "acc";
  ex.tokens = {"turn", "on", "lamp"};
  if (n_slots == 1) {
    ex.triplets = {{0, 2, "lights", "lamp_on", true}};
  } else if (n_slots == 2) {
    ex.triplets = {{2, 2, "music", "play_song", true}, {0, 1, "lights", "lamp_on", false}};
  } else {
    ex.triplets = {{0, 0, "music", "play_song", true},
                   {1, 1, "lights", "lamp_on", false},
                   {2, 2, "timer", "timer_set", false}};
  }
  auto gold = gold_slots(ex, model.coarse_names(), model.fine_names());

  auto build = [&](Graph<double>& g) {
    std::mt19937_64 rng(0);
    auto built = model.build(g, {2, 3, 5}, rng, true, &ex.triplets);
    return build_example_loss(g, built, gold).total;
  };
  return gradcheck::check(model.params(), build);
}

// --- overfit runs ----------------------------------------------------------

struct OverfitResult {
  double exact_span_rate = 0.0;  // examples where every slot's span is exact
  double label_accuracy = 0.0;   // slot pairs with coarse and fine both right
  double final_train_loss = 0.0;
  double epoch1_train_loss = 0.0;
  LossCurve<double> curve;
  double seconds = 0.0;
};

OverfitResult overfit_fixture(const std::string& split_rel, const std::string& taxonomy_rel,
                              std::size_t n_slots, std::size_t epochs) {
  Timer timer;
  const Taxonomy taxonomy = load_taxonomy(data_path(taxonomy_rel));
  DatasetSplit split = load_jsonl(data_path(split_rel), SplitName::kTrain);
  validate_split(split, taxonomy);

  EncoderConfig enc;
  enc.vocab_size = 0;  // set from the vocab below
  Vocab vocab = build_vocab(split, 1);
  enc.vocab_size = vocab.size();
  enc.embed_dim = 32;

  DecoderConfig dec;
  dec.hidden_dim = 32;
  dec.pointer_hidden = 16;
  dec.n_slots = n_slots;

  Model<double> model(enc, dec, std::move(vocab), taxonomy, 1);

  TrainConfig tc;
  tc.learning_rate = 5e-3;
  tc.weight_decay = 1e-5;
  tc.dropout_rate = 0.0;
  tc.epochs = epochs;
  tc.batch_size = 8;
  tc.seed = 1;
  auto result = train(model, split, split, tc);

  OverfitResult out;
  out.curve = result.curve;
  out.epoch1_train_loss = result.curve.front().train_total;
  out.final_train_loss = result.curve.back().train_total;

  std::size_t span_hits = 0, label_hits = 0, pairs = 0;
  for (const auto& ex : split.examples) {
    const auto output = model.forward(model.lookup_tokens(ex.tokens));
    bool all_spans = true;
    for (std::size_t k = 0; k < n_slots; ++k) {
      const auto& pred = output.decoded[k];
      const auto& gold = ex.triplets[k];
      if (pred.start != gold.start || pred.end != gold.end) all_spans = false;
      if (pred.coarse == gold.coarse && pred.fine == gold.fine) ++label_hits;
      ++pairs;
    }
    span_hits += all_spans ? 1 : 0;
  }
  out.exact_span_rate = static_cast<double>(span_hits) / split.examples.size();
  out.label_accuracy = static_cast<double>(label_hits) / pairs;
  out.seconds = timer.seconds();
  return out;
}

// --- random scored examples for the metric checks --------------------------

const std::vector<std::string> kCoarse = {"lights", "music", "timer"};
const std::vector<std::string> kFine = {"lamp_off", "lamp_on", "pause_song", "play_song"};

std::vector<ScoredExample> random_scored(std::mt19937_64& rng, std::size_t n) {
  auto span = [&](std::size_t& s, std::size_t& e) {
    s = rng() % 8;
    e = s + rng() % 3;
  };
  std::vector<ScoredExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScoredExample ex;
    for (std::size_t k = 0; k < 2; ++k) {
      IntentSpanTriplet pred, gold;
      span(pred.start, pred.end);
      span(gold.start, gold.end);
      if (rng() % 2) {  // half the time force a span match
        gold.start = pred.start;
        gold.end = pred.end;
      }
      pred.coarse = kCoarse[rng() % kCoarse.size()];
      gold.coarse = rng() % 2 ? pred.coarse : kCoarse[rng() % kCoarse.size()];
      pred.fine = kFine[rng() % kFine.size()];
      gold.fine = rng() % 2 ? pred.fine : kFine[rng() % kFine.size()];
      pred.primary = gold.primary = (k == 0);
      ex.pred.push_back(pred);
      ex.gold.push_back(gold);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Brute-force per-class counting oracle, same arithmetic as the library.
double oracle_macro_f1(const std::vector<std::string>& preds,
                       const std::vector<std::string>& golds,
                       const std::vector<std::string>& space) {
  double total = 0.0;
  for (const auto& label : space) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == label, g = golds[i] == label;
      if (p && g) ++tp;
      if (p && !g) ++fp;
      if (!p && g) ++fn;
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    total += precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return total / static_cast<double>(space.size());
}

// --- criteria --------------------------------------------------------------

std::pair<bool, std::string> check_gradients() {
  Timer timer;
  auto report = whole_model_gradcheck(2);
  const double secs = timer.seconds();
  std::ostringstream detail;
  detail << "max rel " << fmt("%.2e", report.max_rel_error) << " over " << report.checked
         << " coords in " << fmt("%.1f", secs) << "s";
  return {report.max_rel_error < 1e-4 && report.checked > 1000 && secs < 30.0,
          detail.str()};
}

std::pair<bool, std::string> check_overfit() {
  auto r = overfit_fixture("fixtures/two_intent/train.jsonl",
                           "fixtures/taxonomy_two_coarse.json", 2, 200);
  std::ostringstream detail;
  detail << "exact spans " << fmt("%.3f", r.exact_span_rate) << ", labels "
         << fmt("%.3f", r.label_accuracy) << " in " << fmt("%.1f", r.seconds) << "s";
  return {r.exact_span_rate >= 0.95 && r.label_accuracy == 1.0 && r.seconds < 300.0,
          detail.str()};
}

std::pair<bool, std::string> check_loss_trend() {
  auto r = overfit_fixture("fixtures/two_intent/train.jsonl",
                           "fixtures/taxonomy_two_coarse.json", 2, 10);
  const std::string path = testsupport::temp_path("acceptance-curve") + ".csv";
  emit_loss_curve(r.curve, path);
  const std::string contents = testsupport::read_file(path);
  fs::remove(path);
  const std::string header = contents.substr(0, contents.find('\n'));
  const bool header_ok =
      header == "epoch,train_total,train_primary,train_non_primary,train_span,dev_total";
  std::ostringstream detail;
  detail << "epoch1 " << fmt("%.3f", r.epoch1_train_loss) << " -> epoch10 "
         << fmt("%.3f", r.final_train_loss) << (header_ok ? "" : "; bad CSV header");
  return {r.final_train_loss < 0.5 * r.epoch1_train_loss && header_ok, detail.str()};
}

std::pair<bool, std::string> check_threshold_monotonic() {
  std::mt19937_64 rng(202);
  const std::vector<double> thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
  for (int trial = 0; trial < 200; ++trial) {
    auto examples = random_scored(rng, 1 + rng() % 6);
    auto rep = score_predictions(examples, kCoarse, kFine, thresholds);
    const double cap_primary =
        std::min(rep.coarse_primary.accuracy, rep.fine_primary.accuracy);
    const double cap_average =
        std::min(rep.coarse_average.accuracy, rep.fine_average.accuracy);
    for (std::size_t i = 0; i < rep.thresholded.size(); ++i) {
      const auto& row = rep.thresholded[i].second;
      if (row.primary > cap_primary || row.average > cap_average)
        return {false, "thresholded exceeds unthresholded at trial " + std::to_string(trial)};
      if (i > 0) {
        const auto& prev = rep.thresholded[i - 1].second;
        if (row.primary > prev.primary || row.average > prev.average)
          return {false, "accuracy rose with the threshold at trial " + std::to_string(trial)};
      }
    }
  }
  return {true, "200 random prediction sets, thresholds 0.5..0.9"};
}

std::pair<bool, std::string> check_metric_oracle() {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_labels = 1 + rng() % 5;
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::string> space;
    for (std::size_t i = 0; i < n_labels; ++i) space.push_back("c" + std::to_string(i));

    std::vector<std::string> preds, golds;
    std::vector<ScoredExample> examples;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(space[rng() % n_labels]);
      golds.push_back(space[rng() % n_labels]);
      hits += preds.back() == golds.back() ? 1 : 0;
      ScoredExample ex;
      ex.pred = {{0, 0, preds.back(), "f0", true}};
      ex.gold = {{0, 0, golds.back(), "f0", true}};
      examples.push_back(std::move(ex));
    }

    const auto rep = score_predictions(examples, space, {"f0"}, {});
    const double oracle_acc = static_cast<double>(hits) / static_cast<double>(n);
    if (rep.coarse_primary.accuracy != oracle_acc)
      return {false, "accuracy mismatch at trial " + std::to_string(trial)};
    if (macro_f1(preds, golds, space) != oracle_macro_f1(preds, golds, space))
      return {false, "macro-F1 mismatch at trial " + std::to_string(trial)};
    if (rep.coarse_primary.macro_f1 != oracle_macro_f1(preds, golds, space))
      return {false, "report macro-F1 mismatch at trial " + std::to_string(trial)};
  }
  return {true, "100 random instances, exact double equality"};
}

std::pair<bool, std::string> check_distributions() {
  std::mt19937_64 rng(4242);
  std::size_t slots_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    EncoderConfig enc;
    enc.contextual = rng() % 2 == 0;
    // the bidirectional layer needs an even dimension to split across directions
    enc.embed_dim = enc.contextual ? 2 * (1 + static_cast<Eigen::Index>(rng() % 3))
                                   : 1 + static_cast<Eigen::Index>(rng() % 5);

    DecoderConfig dec;
    dec.hidden_dim = 1 + static_cast<Eigen::Index>(rng() % 5);
    dec.pointer_hidden = 1 + static_cast<Eigen::Index>(rng() % 4);
    dec.n_slots = 1 + rng() % 3;
    dec.n_steps = 1 + rng() % 2;
    dec.sum_tuple_history = rng() % 2 == 0;

    Vocab vocab;
    vocab.index_to_token = {"<pad>", "<unk>"};
    const std::size_t extra = 2 + rng() % 9;
    for (std::size_t i = 0; i < extra; ++i)
      vocab.index_to_token.push_back("t" + std::to_string(i));
    for (std::size_t i = 0; i < vocab.index_to_token.size(); ++i)
      vocab.token_to_index[vocab.index_to_token[i]] = i;
    enc.vocab_size = vocab.size();

    Model<double> model(enc, dec, std::move(vocab), testsupport::small_taxonomy(), rng());

    const std::size_t len = 1 + rng() % 8;
    std::vector<std::size_t> ids(len, 0);
    for (auto& id : ids)
      if (rng() % 4 != 0) id = 1 + rng() % (enc.vocab_size - 1);
    ids[rng() % len] = 1 + rng() % (enc.vocab_size - 1);  // at least one real token

    const auto out = model.forward(ids);
    for (const auto& step : out.steps) {
      for (const auto& slot : step.slots) {
        ++slots_seen;
        if (std::abs(slot.start.sum() - 1.0) > 1e-6 || std::abs(slot.end.sum() - 1.0) > 1e-6)
          return {false, "pointer distribution sum off at trial " + std::to_string(trial)};
        if (std::abs(slot.coarse.sum() - 1.0) > 1e-6 || std::abs(slot.fine.sum() - 1.0) > 1e-6)
          return {false, "label distribution sum off at trial " + std::to_string(trial)};
        for (std::size_t pos = 0; pos < ids.size(); ++pos)
          if (!out.mask[pos] &&
              (slot.start(static_cast<Eigen::Index>(pos)) != 0.0 ||
               slot.end(static_cast<Eigen::Index>(pos)) != 0.0))
            return {false, "padded position got mass at trial " + std::to_string(trial)};
      }
    }
  }
  return {true, "1000 randomized shapes, " + std::to_string(slots_seen) + " slots checked"};
}

std::pair<bool, std::string> check_taxonomy_fixtures() {
  const std::vector<std::pair<std::string, std::size_t>> expected = {
      {"snips", 4}, {"facebook", 5}, {"hwu", 18}, {"banking", 12}, {"clinc", 120},
      {"atis", 21}};
  std::ostringstream detail;
  for (const auto& [name, count] : expected) {
    const Taxonomy tax = load_taxonomy(data_path("taxonomies/" + name + ".json"));
    const auto result = validate_expected_sizes(tax, count);
    if (!result.passed) return {false, name + ": " + result.message};
    detail << name << "=" << tax.coarse_count() << " ";
  }
  return {true, detail.str()};
}

std::pair<bool, std::string> check_k_shot() {
  DatasetSplit split =
      load_jsonl(data_path("fixtures/two_intent/train.jsonl"), SplitName::kTrain);
  std::map<std::string, std::size_t> available;
  for (const auto& ex : split.examples) ++available[ex.triplets[0].fine];

  for (std::size_t k : {std::size_t{5}, std::size_t{10}}) {
    const DatasetSplit once = sample_k_shot(split, k, KShotKey::kFine, 31);
    const DatasetSplit again = sample_k_shot(split, k, KShotKey::kFine, 31);
    if (!(once == again)) return {false, "same seed gave different selections"};

    std::map<std::string, std::size_t> got;
    for (const auto& ex : once.examples) ++got[ex.triplets[0].fine];
    for (const auto& [label, avail] : available) {
      const std::size_t want = std::min(k, avail);
      if (got[label] != want)
        return {false, "k=" + std::to_string(k) + " label " + label + ": got " +
                           std::to_string(got[label]) + ", want " + std::to_string(want)};
    }
  }
  std::ostringstream detail;
  detail << "labels:";
  for (const auto& [label, avail] : available) detail << " " << label << "(" << avail << ")";
  return {true, detail.str()};
}

std::pair<bool, std::string> check_slot_generality() {
  auto g1 = whole_model_gradcheck(1);
  auto g3 = whole_model_gradcheck(3);
  if (g1.max_rel_error >= 1e-4 || g3.max_rel_error >= 1e-4)
    return {false, "gradcheck: N=1 " + fmt("%.2e", g1.max_rel_error) + ", N=3 " +
                       fmt("%.2e", g3.max_rel_error)};

  auto f1 = overfit_fixture("fixtures/one_intent/train.jsonl",
                            "fixtures/taxonomy_two_coarse.json", 1, 200);
  auto f3 = overfit_fixture("fixtures/three_intent/train.jsonl",
                            "fixtures/taxonomy_three_coarse.json", 3, 200);
  std::ostringstream detail;
  detail << "N=1 spans " << fmt("%.3f", f1.exact_span_rate) << " labels "
         << fmt("%.3f", f1.label_accuracy) << "; N=3 spans " << fmt("%.3f", f3.exact_span_rate)
         << " labels " << fmt("%.3f", f3.label_accuracy);
  const bool pass = f1.exact_span_rate >= 0.95 && f1.label_accuracy == 1.0 &&
                    f1.seconds < 300.0 && f3.exact_span_rate >= 0.95 &&
                    f3.label_accuracy == 1.0 && f3.seconds < 300.0;
  return {pass, detail.str()};
}

std::pair<bool, std::string> check_reproducibility() {
  const std::string root = testsupport::temp_path("acceptance-repro");
  fs::create_directories(root);
  const std::string config = root + "/config.txt";
  testsupport::write_file(config,
                          "embed_dim = 16\nhidden_dim = 16\npointer_hidden = 8\n"
                          "epochs = 5\nlearning_rate = 1e-3\ndropout_rate = 0.5\n"
                          "batch_size = 8\nseed = 9\n");

  auto run = [&](const std::string& out_dir) {
    std::ostringstream cmd;
    cmd << '"' << ACCEPTANCE_CLI << '"' << " train --train "
        << data_path("fixtures/two_intent/train.jsonl") << " --dev "
        << data_path("fixtures/two_intent/dev.jsonl") << " --taxonomy "
        << data_path("fixtures/taxonomy_two_coarse.json") << " --config " << config
        << " --out " << out_dir << " > /dev/null 2>&1";
    return std::system(cmd.str().c_str());
  };
  const int rc_a = run(root + "/a");
  const int rc_b = run(root + "/b");
  if (rc_a != 0 || rc_b != 0) {
    fs::remove_all(root);
    return {false, "training run exited nonzero"};
  }
  const std::string csv_a = testsupport::read_file(root + "/a/loss_curve.csv");
  const std::string csv_b = testsupport::read_file(root + "/b/loss_curve.csv");
  fs::remove_all(root);
  if (csv_a.empty() || csv_a != csv_b) return {false, "loss curves differ between runs"};
  return {true, std::to_string(csv_a.size()) + " bytes, byte-identical"};
}

}  // namespace

int main() {
  criterion(1, "gradient check (toy dims, N=2)", check_gradients);
  criterion(2, "overfit 32-example fixture", check_overfit);
  criterion(3, "loss halves by epoch 10 + CSV header", check_loss_trend);
  criterion(4, "threshold monotonicity", check_threshold_monotonic);
  criterion(5, "metric oracle equivalence", check_metric_oracle);
  criterion(6, "softmax sums and pad zeros", check_distributions);
  criterion(7, "taxonomy fixture coarse counts", check_taxonomy_fixtures);
  criterion(8, "k-shot sampler contract", check_k_shot);
  criterion(9, "N=1 and N=3 generality", check_slot_generality);
  criterion(10, "byte-identical training reruns", check_reproducibility);

  if (failures == 0) {
    std::printf("ACCEPTANCE: all 10 criteria passed\n");
    return 0;
  }
  std::printf("ACCEPTANCE: %d of 10 criteria FAILED\n", failures);
  return 1;
}
