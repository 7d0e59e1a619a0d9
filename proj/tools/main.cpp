// intentspan: synthesize multi-intent corpora, train the pointer-network
// model, evaluate checkpoints and run single-sentence predictions.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "intentspan/checkpoint.hpp"
#include "intentspan/corpus.hpp"
#include "intentspan/errors.hpp"
#include "intentspan/eval.hpp"
#include "intentspan/model.hpp"
#include "intentspan/taxonomy.hpp"
#include "intentspan/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using intentspan::ValidationError;

// ---------------------------------------------------------------------------
// Run configuration: flat key=value file merged with command-line flags.

struct RunConfig {
  Eigen::Index embed_dim = 64;
  Eigen::Index hidden_dim = 64;
  Eigen::Index pointer_hidden = 64;
  std::size_t n_slots = 2;
  std::size_t n_steps = 1;
  bool contextual = false;
  bool sum_tuple_history = true;
  std::size_t min_count = 1;
  double learning_rate = 1e-5;
  double weight_decay = 1e-5;
  double dropout_rate = 0.5;
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool seed_was_set = false;  // config or flag set `seed` explicitly
};

const char* kKnownKeys =
    "batch_size, contextual, dropout_rate, embed_dim, epochs, hidden_dim, "
    "learning_rate, min_count, n_slots, n_steps, pointer_hidden, seed, "
    "sum_tuple_history, weight_decay";

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* begin = value.data();
  const char* end = begin + value.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw ValidationError("config: '" + key + "' expects a non-negative integer, got '" +
                          value + "'");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value, std::size_t min) {
  const std::uint64_t v = parse_u64(key, value);
  if (v < min)
    throw ValidationError("config: '" + key + "' must be >= " + std::to_string(min) +
                          ", got '" + value + "'");
  return static_cast<std::size_t>(v);
}

Eigen::Index parse_dim(const std::string& key, const std::string& value) {
  return static_cast<Eigen::Index>(parse_count(key, value, 1));
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    throw ValidationError("config: '" + key + "' expects a real number, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError("config: '" + key + "' expects true or false, got '" + value + "'");
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "embed_dim") cfg.embed_dim = parse_dim(key, value);
  else if (key == "hidden_dim") cfg.hidden_dim = parse_dim(key, value);
  else if (key == "pointer_hidden") cfg.pointer_hidden = parse_dim(key, value);
  else if (key == "n_slots") cfg.n_slots = parse_count(key, value, 1);
  else if (key == "n_steps") cfg.n_steps = parse_count(key, value, 1);
  else if (key == "contextual") cfg.contextual = parse_bool(key, value);
  else if (key == "sum_tuple_history") cfg.sum_tuple_history = parse_bool(key, value);
  else if (key == "min_count") cfg.min_count = parse_count(key, value, 1);
  else if (key == "learning_rate") cfg.learning_rate = parse_real(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_real(key, value);
  else if (key == "dropout_rate") cfg.dropout_rate = parse_real(key, value);
  else if (key == "epochs") cfg.epochs = parse_count(key, value, 1);
  else if (key == "batch_size") cfg.batch_size = parse_count(key, value, 1);
  else if (key == "seed") { cfg.seed = parse_u64(key, value); cfg.seed_was_set = true; }
  else
    throw ValidationError("config: unknown key '" + key + "' (known keys: " + kKnownKeys +
                          ")");
}

// Lines are `key = value`; `#` starts a comment; blank lines are skipped.
// Later entries override earlier ones.
RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(line_no) +
                            ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError("config: line " + std::to_string(line_no) + ": empty key");
    apply_config_entry(base, key, value);
  }
  return base;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("MLMCID_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return parse_u64("MLMCID_SEED", v);
}

// ---------------------------------------------------------------------------
// Small shared helpers.

intentspan::CorpusCounts parse_counts(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') { parts.push_back(cur); cur.clear(); }
    else cur += c;
  }
  parts.push_back(cur);
  if (parts.size() != 3)
    throw ValidationError("--counts expects TRAIN,DEV,TEST, got '" + text + "'");
  intentspan::CorpusCounts counts;
  counts.train = parse_count("counts", trim(parts[0]), 0);
  counts.dev = parse_count("counts", trim(parts[1]), 0);
  counts.test = parse_count("counts", trim(parts[2]), 0);
  return counts;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::string cur;
  auto flush = [&] {
    const std::string item = trim(cur);
    if (item.empty()) throw ValidationError("--thresholds contains an empty entry");
    out.push_back(parse_real("thresholds", item));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',') flush();
    else cur += c;
  }
  flush();
  return out;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for hashing");
  constexpr std::uint64_t kOffset = 14695981039346656037ull;
  constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t hash = kOffset;
  char buffer[4096];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= kPrime;
    }
  }
  return hash;
}

std::string hex_u64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw intentspan::Error("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct SynthesizeArgs {
  std::string pool;
  std::string taxonomy;
  std::string out_dir;
  std::string counts = "800,100,100";
  std::size_t n_intents = 2;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string policy = "second-span-primary";
};

int run_synthesize(const SynthesizeArgs& args) {
  const intentspan::CorpusCounts counts = parse_counts(args.counts);
  const auto pool = intentspan::load_pool(args.pool);
  const intentspan::Taxonomy taxonomy = intentspan::load_taxonomy(args.taxonomy);

  intentspan::CorpusOptions options;
  options.n_intents = args.n_intents;
  options.policy = intentspan::parse_primary_policy(args.policy);
  options.seed = args.seed_given ? args.seed : env_seed().value_or(0);

  const auto splits = intentspan::build_corpus(pool, taxonomy, counts, options);
  fs::create_directories(args.out_dir);

  const char* names[] = {"train.jsonl", "dev.jsonl", "test.jsonl"};
  ordered_json files = ordered_json::object();
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const fs::path path = fs::path(args.out_dir) / names[i];
    intentspan::save_jsonl(splits[i], path.string());
    files[names[i]] = {{"examples", splits[i].examples.size()},
                       {"fnv1a_64", hex_u64(fnv1a_file(path))}};
  }

  ordered_json manifest;
  manifest["taxonomy"] = taxonomy.dataset_name();
  manifest["counts"] = {{"train", counts.train}, {"dev", counts.dev}, {"test", counts.test}};
  manifest["n_intents"] = options.n_intents;
  manifest["primary_policy"] = intentspan::primary_policy_name(options.policy);
  manifest["joiner"] = options.joiner;
  manifest["seed"] = options.seed;
  manifest["files"] = files;
  write_text(fs::path(args.out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "wrote " << splits[0].examples.size() << "/" << splits[1].examples.size()
            << "/" << splits[2].examples.size() << " examples to " << args.out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string train;
  std::string dev;
  std::string taxonomy;
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t epochs = 0;
  bool epochs_given = false;
};

int run_train(const TrainArgs& args) {
  RunConfig cfg;
  if (!args.config.empty()) cfg = load_run_config(args.config, cfg);
  if (args.epochs_given) cfg.epochs = args.epochs;
  if (args.seed_given) {
    cfg.seed = args.seed;
  } else if (!cfg.seed_was_set) {
    cfg.seed = env_seed().value_or(cfg.seed);
  }

  const intentspan::Taxonomy taxonomy = intentspan::load_taxonomy(args.taxonomy);
  intentspan::DatasetSplit train_split =
      intentspan::load_jsonl(args.train, intentspan::SplitName::kTrain);
  intentspan::DatasetSplit dev_split =
      intentspan::load_jsonl(args.dev, intentspan::SplitName::kDev);
  intentspan::validate_split(train_split, taxonomy);
  intentspan::validate_split(dev_split, taxonomy);

  intentspan::Vocab vocab = intentspan::build_vocab(train_split, cfg.min_count);

  intentspan::EncoderConfig enc;
  enc.vocab_size = vocab.size();
  enc.embed_dim = cfg.embed_dim;
  enc.contextual = cfg.contextual;
  enc.dropout_rate = cfg.dropout_rate;

  intentspan::DecoderConfig dec;
  dec.hidden_dim = cfg.hidden_dim;
  dec.pointer_hidden = cfg.pointer_hidden;
  dec.n_slots = cfg.n_slots;
  dec.n_steps = cfg.n_steps;
  dec.dropout_rate = cfg.dropout_rate;
  dec.sum_tuple_history = cfg.sum_tuple_history;

  intentspan::Model<double> model(enc, dec, std::move(vocab), taxonomy, cfg.seed);

  intentspan::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.weight_decay = cfg.weight_decay;
  tc.dropout_rate = cfg.dropout_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;

  const auto result = intentspan::train(model, train_split, dev_split, tc);

  fs::create_directories(args.out_dir);
  const fs::path curve_path = fs::path(args.out_dir) / "loss_curve.csv";
  const fs::path ckpt_path = fs::path(args.out_dir) / "checkpoint.json";
  intentspan::emit_loss_curve(result.curve, curve_path.string());
  intentspan::save_checkpoint(model, taxonomy, cfg.seed, result.best_epoch,
                              ckpt_path.string());

  std::cout << "trained " << cfg.epochs << " epochs; best dev loss " << result.best_dev
            << " at epoch " << result.best_epoch << "; wrote " << ckpt_path.string()
            << " and " << curve_path.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string test;
  std::string thresholds = "0.5,0.6,0.7,0.8,0.9";
  std::string out;
};

int run_eval(const EvalArgs& args) {
  const auto loaded = intentspan::load_checkpoint(args.checkpoint);
  intentspan::DatasetSplit test_split =
      intentspan::load_jsonl(args.test, intentspan::SplitName::kTest);
  intentspan::validate_split(test_split, *loaded.taxonomy);

  const std::vector<double> thresholds = parse_thresholds(args.thresholds);
  const intentspan::MetricsReport report =
      intentspan::evaluate(*loaded.model, test_split, thresholds);

  if (args.out.empty())
    std::cout << intentspan::render_report(report);
  else
    intentspan::render_report(report, args.out);
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string text;
};

int run_predict(const PredictArgs& args) {
  const std::vector<std::string> tokens = intentspan::tokenize(args.text);
  if (tokens.empty()) throw ValidationError("predict: text is empty");

  const auto loaded = intentspan::load_checkpoint(args.checkpoint);
  const auto output = loaded.model->forward_tokens(tokens);

  ordered_json intents = ordered_json::array();
  for (const auto& t : output.decoded)
    intents.push_back({{"start", t.start},
                       {"end", t.end},
                       {"coarse", t.coarse},
                       {"fine", t.fine},
                       {"primary", t.primary}});
  ordered_json doc;
  doc["intents"] = std::move(intents);
  std::cout << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointer-network multi-intent span detection"};
  app.require_subcommand(1);

  SynthesizeArgs syn;
  CLI::App* syn_cmd =
      app.add_subcommand("synthesize", "Build train/dev/test splits from a single-intent pool");
  syn_cmd->add_option("--pool", syn.pool, "Single-intent pool JSONL")->required();
  syn_cmd->add_option("--taxonomy", syn.taxonomy, "Taxonomy JSON")->required();
  syn_cmd->add_option("--out", syn.out_dir, "Output directory")->required();
  syn_cmd->add_option("--counts", syn.counts, "TRAIN,DEV,TEST example counts");
  syn_cmd->add_option("--n-intents", syn.n_intents, "Intents per synthesized example");
  CLI::Option* syn_seed = syn_cmd->add_option("--seed", syn.seed, "Sampling seed");
  syn_cmd->add_option("--primary-policy", syn.policy,
                      "second-span-primary, first-span-primary or annotated");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--train", tr.train, "Training split JSONL")->required();
  train_cmd->add_option("--dev", tr.dev, "Dev split JSONL")->required();
  train_cmd->add_option("--taxonomy", tr.taxonomy, "Taxonomy JSON")->required();
  train_cmd->add_option("--config", tr.config, "key=value run configuration");
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();
  CLI::Option* tr_seed = train_cmd->add_option("--seed", tr.seed, "Init and shuffle seed");
  CLI::Option* tr_epochs = train_cmd->add_option("--epochs", tr.epochs, "Epoch count");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a test split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
  eval_cmd->add_option("--test", ev.test, "Test split JSONL")->required();
  eval_cmd->add_option("--thresholds", ev.thresholds, "Comma-separated overlap thresholds");
  eval_cmd->add_option("--out", ev.out, "Report path (stdout when omitted)");

  PredictArgs pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Decode intents for one sentence");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint JSON")->required();
  predict_cmd->add_option("--text", pr.text, "Input sentence")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  syn.seed_given = syn_seed->count() > 0;
  tr.seed_given = tr_seed->count() > 0;
  tr.epochs_given = tr_epochs->count() > 0;

  try {
    if (syn_cmd->parsed()) return run_synthesize(syn);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    return run_predict(pr);
  } catch (const intentspan::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
