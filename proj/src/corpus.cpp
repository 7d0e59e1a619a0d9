#include "intentspan/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace intentspan {

using nlohmann::json;
using nlohmann::ordered_json;

std::string language_name(Language lang) {
  switch (lang) {
    case Language::kEn: return "en";
    case Language::kEs: return "es";
    case Language::kTh: return "th";
    case Language::kOther: return "other";
  }
  return "other";
}

Language parse_language(const std::string& name) {
  if (name == "en") return Language::kEn;
  if (name == "es") return Language::kEs;
  if (name == "th") return Language::kTh;
  return Language::kOther;
}

std::string split_name_string(SplitName name) {
  switch (name) {
    case SplitName::kTrain: return "train";
    case SplitName::kDev: return "dev";
    case SplitName::kTest: return "test";
  }
  return "train";
}

std::string primary_policy_name(PrimaryPolicy policy) {
  switch (policy) {
    case PrimaryPolicy::kSecondSpanPrimary: return "second-span-primary";
    case PrimaryPolicy::kFirstSpanPrimary: return "first-span-primary";
    case PrimaryPolicy::kAnnotated: return "annotated";
  }
  return "second-span-primary";
}

PrimaryPolicy parse_primary_policy(const std::string& name) {
  if (name == "second-span-primary") return PrimaryPolicy::kSecondSpanPrimary;
  if (name == "first-span-primary") return PrimaryPolicy::kFirstSpanPrimary;
  if (name == "annotated") return PrimaryPolicy::kAnnotated;
  throw ValidationError("unknown primary policy '" + name +
                        "' (expected second-span-primary, first-span-primary or annotated)");
}

namespace {

bool is_unicode_whitespace(char32_t cp) {
  switch (cp) {
    case U'\t': case U'\n': case 0x0B: case 0x0C: case U'\r':
    case U' ': case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 codepoint at `i`, advancing `i`. Malformed bytes are
// treated as Latin-1 so tokenization never throws.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = c;
  if (c >= 0xF0) { len = 4; cp = c & 0x07u; }
  else if (c >= 0xE0) { len = 3; cp = c & 0x0Fu; }
  else if (c >= 0xC0) { len = 2; cp = c & 0x1Fu; }
  if (i + len > s.size()) { ++i; return c; }
  for (std::size_t k = 1; k < len; ++k) {
    unsigned char cont = static_cast<unsigned char>(s[i + k]);
    if ((cont & 0xC0u) != 0x80u) { ++i; return c; }
    cp = (cp << 6) | (cont & 0x3Fu);
  }
  i += len;
  return cp;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    char32_t cp = next_codepoint(text, i);
    if (is_unicode_whitespace(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.append(text, start, i - start);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void validate_example(const MultiIntentExample& example, const Taxonomy& taxonomy) {
  const std::string where = "example '" + example.id + "': ";
  if (example.tokens.empty()) throw ValidationError(where + "no tokens");
  if (example.triplets.empty()) throw ValidationError(where + "no intent triplets");

  std::size_t primary_count = 0;
  std::vector<bool> covered(example.tokens.size(), false);
  for (std::size_t k = 0; k < example.triplets.size(); ++k) {
    const auto& t = example.triplets[k];
    if (t.primary) ++primary_count;
    if (t.start > t.end)
      throw ValidationError(where + "triplet " + std::to_string(k) + " has start > end");
    if (t.end >= example.tokens.size())
      throw ValidationError(where + "triplet " + std::to_string(k) +
                            " span exceeds sentence length");
    for (std::size_t j = t.start; j <= t.end; ++j) {
      if (covered[j])
        throw ValidationError(where + "overlapping spans at token " + std::to_string(j));
      covered[j] = true;
    }
    const std::string& expected = taxonomy.coarse_of(t.fine);
    if (t.coarse != expected)
      throw ValidationError(where + "coarse '" + t.coarse + "' does not match coarse_of('" +
                            t.fine + "') = '" + expected + "'");
  }
  if (primary_count != 1)
    throw ValidationError(where + "expected exactly one primary triplet, found " +
                          std::to_string(primary_count));
  if (!example.triplets.front().primary)
    throw ValidationError(where + "primary triplet must occupy slot 0");
}

void validate_split(const DatasetSplit& split, const Taxonomy& taxonomy) {
  std::set<std::string> ids;
  for (const auto& example : split.examples) {
    if (!ids.insert(example.id).second)
      throw ValidationError("split '" + split_name_string(split.name) + "': duplicate id '" +
                            example.id + "'");
    validate_example(example, taxonomy);
  }
}

MultiIntentExample synthesize_many(const std::vector<Utterance>& utterances,
                                   const Taxonomy& taxonomy, const std::string& joiner,
                                   PrimaryPolicy policy, std::string id) {
  if (utterances.empty()) throw ValidationError("synthesize: no utterances");

  std::set<std::string> coarse_seen;
  for (const auto& u : utterances) {
    if (trim_label(u.text).empty()) throw ValidationError("synthesize: empty utterance text");
    if (u.language != utterances.front().language)
      throw ValidationError("synthesize: mixed languages in one example");
    const std::string& coarse = taxonomy.coarse_of(u.fine_intent);
    if (utterances.size() > 1 && !coarse_seen.insert(coarse).second)
      throw ValidationError("synthesize: coarse collision on '" + coarse +
                            "'; combined utterances must have distinct coarse labels");
  }

  // Splice texts and derive spans from token counts at each boundary.
  // The joiner may glue punctuation onto the previous utterance's last
  // token; it must never merge two utterances into one token.
  MultiIntentExample example;
  example.id = std::move(id);
  example.language = utterances.front().language;

  std::string base;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const std::string& text = utterances[i].text;
    std::size_t own = tokenize(text).size();
    std::size_t with = tokenize(base + text).size();
    std::size_t before = with - own;
    if (i > 0 && before < spans.back().second + 1)
      throw ValidationError("synthesize: joiner '" + joiner +
                            "' merges adjacent utterances; it must end with whitespace");
    spans.emplace_back(before, with - 1);
    base += text;
    if (i + 1 < utterances.size()) base += joiner;
  }
  example.tokens = tokenize(base);

  std::size_t primary_index = 0;
  switch (policy) {
    case PrimaryPolicy::kSecondSpanPrimary:
      primary_index = utterances.size() > 1 ? 1 : 0;
      break;
    case PrimaryPolicy::kFirstSpanPrimary:
      primary_index = 0;
      break;
    case PrimaryPolicy::kAnnotated: {
      std::vector<std::size_t> marked;
      for (std::size_t i = 0; i < utterances.size(); ++i)
        if (utterances[i].primary) marked.push_back(i);
      if (marked.empty())
        throw ValidationError("synthesize: annotated policy but no utterance marked primary");
      primary_index = marked.back();
      example.both_primary = marked.size() > 1;
      break;
    }
  }

  auto make_triplet = [&](std::size_t i, bool primary) {
    IntentSpanTriplet t;
    t.start = spans[i].first;
    t.end = spans[i].second;
    t.fine = utterances[i].fine_intent;
    t.coarse = taxonomy.coarse_of(t.fine);
    t.primary = primary;
    return t;
  };
  example.triplets.push_back(make_triplet(primary_index, true));
  for (std::size_t i = 0; i < utterances.size(); ++i)
    if (i != primary_index) example.triplets.push_back(make_triplet(i, false));

  validate_example(example, taxonomy);
  return example;
}

MultiIntentExample synthesize_pair(const Utterance& u1, const Utterance& u2,
                                   const Taxonomy& taxonomy, const std::string& joiner,
                                   PrimaryPolicy policy, std::uint64_t rng_seed) {
  (void)rng_seed;  // splicing itself is deterministic
  return synthesize_many({u1, u2}, taxonomy, joiner, policy, "pair-0");
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_below: empty range");
  const std::uint64_t reject_below = (0 - n) % n;  // 2^64 mod n
  std::uint64_t x = rng();
  while (x < reject_below) x = rng();
  return x % n;
}

std::vector<DatasetSplit> build_corpus(const std::vector<Utterance>& pool,
                                       const Taxonomy& taxonomy, const CorpusCounts& counts,
                                       const CorpusOptions& options) {
  if (options.n_intents == 0) throw ValidationError("build_corpus: n_intents must be >= 1");
  if (counts.train == 0 || counts.dev == 0 || counts.test == 0)
    throw ValidationError("build_corpus: split counts must be positive");
  for (const auto& u : pool) taxonomy.coarse_of(u.fine_intent);  // reject unknown labels

  std::set<std::string> distinct_coarse;
  for (const auto& u : pool) distinct_coarse.insert(taxonomy.coarse_of(u.fine_intent));
  if (pool.size() < options.n_intents || distinct_coarse.size() < options.n_intents)
    throw ValidationError(
        "build_corpus: synthesis exhausted; pool has " + std::to_string(pool.size()) +
        " utterances over " + std::to_string(distinct_coarse.size()) +
        " coarse labels, need " + std::to_string(options.n_intents) + " distinct");

  std::set<std::vector<std::size_t>> used_tuples;
  std::vector<DatasetSplit> splits;
  const SplitName names[] = {SplitName::kTrain, SplitName::kDev, SplitName::kTest};
  const std::size_t targets[] = {counts.train, counts.dev, counts.test};

  for (std::size_t s = 0; s < 3; ++s) {
    DatasetSplit split;
    split.name = names[s];
    std::mt19937_64 rng(options.seed + s);
    const std::size_t target = targets[s];
    std::size_t attempts = 0;
    const std::size_t max_attempts = target * 1000 + 1000;

    while (split.examples.size() < target) {
      if (++attempts > max_attempts)
        throw ValidationError("build_corpus: synthesis exhausted for split '" +
                              split_name_string(split.name) + "' after " +
                              std::to_string(attempts - 1) + " attempts");

      std::vector<std::size_t> tuple;
      std::set<std::string> coarse_seen;
      bool ok = true;
      for (std::size_t k = 0; k < options.n_intents && ok; ++k) {
        std::size_t idx = static_cast<std::size_t>(uniform_below(rng, pool.size()));
        if (std::find(tuple.begin(), tuple.end(), idx) != tuple.end()) { ok = false; break; }
        const auto& u = pool[idx];
        if (!tuple.empty() && u.language != pool[tuple.front()].language) ok = false;
        if (ok && options.n_intents > 1 &&
            !coarse_seen.insert(taxonomy.coarse_of(u.fine_intent)).second)
          ok = false;
        if (ok) tuple.push_back(idx);
      }
      if (!ok || used_tuples.count(tuple)) continue;

      std::vector<Utterance> chosen;
      for (std::size_t idx : tuple) chosen.push_back(pool[idx]);
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%05zu", split_name_string(split.name).c_str(),
                    split.examples.size());
      split.examples.push_back(
          synthesize_many(chosen, taxonomy, options.joiner, options.policy, id));
      used_tuples.insert(tuple);
    }
    validate_split(split, taxonomy);
    splits.push_back(std::move(split));
  }
  return splits;
}

namespace {

const json& require_field(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw ParseError("line " + std::to_string(line) + ": missing field " + field);
  return *it;
}

MultiIntentExample parse_example_line(const std::string& line, std::size_t line_no) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object())
    throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");

  MultiIntentExample example;
  const json& id = require_field(doc, "id", line_no);
  const json& tokens = require_field(doc, "tokens", line_no);
  const json& language = require_field(doc, "language", line_no);
  const json& intents = require_field(doc, "intents", line_no);
  if (!id.is_string())
    throw ParseError("line " + std::to_string(line_no) + ": field id must be a string");
  if (!tokens.is_array())
    throw ParseError("line " + std::to_string(line_no) + ": field tokens must be an array");
  if (!language.is_string())
    throw ParseError("line " + std::to_string(line_no) + ": field language must be a string");
  if (!intents.is_array())
    throw ParseError("line " + std::to_string(line_no) + ": field intents must be an array");

  example.id = id.get<std::string>();
  for (const auto& t : tokens) {
    if (!t.is_string())
      throw ParseError("line " + std::to_string(line_no) + ": tokens must be strings");
    example.tokens.push_back(t.get<std::string>());
  }
  example.language = parse_language(language.get<std::string>());
  for (const auto& intent : intents) {
    if (!intent.is_object())
      throw ParseError("line " + std::to_string(line_no) + ": intents entries must be objects");
    IntentSpanTriplet triplet;
    const json& start = require_field(intent, "start", line_no);
    const json& end = require_field(intent, "end", line_no);
    const json& coarse = require_field(intent, "coarse", line_no);
    const json& fine = require_field(intent, "fine", line_no);
    const json& primary = require_field(intent, "primary", line_no);
    if (!start.is_number_unsigned() || !end.is_number_unsigned())
      throw ParseError("line " + std::to_string(line_no) +
                       ": fields start/end must be non-negative integers");
    if (!coarse.is_string() || !fine.is_string())
      throw ParseError("line " + std::to_string(line_no) +
                       ": fields coarse/fine must be strings");
    if (!primary.is_boolean())
      throw ParseError("line " + std::to_string(line_no) + ": field primary must be a boolean");
    triplet.start = start.get<std::size_t>();
    triplet.end = end.get<std::size_t>();
    triplet.coarse = coarse.get<std::string>();
    triplet.fine = fine.get<std::string>();
    triplet.primary = primary.get<bool>();
    example.triplets.push_back(std::move(triplet));
  }
  if (doc.contains("both_primary")) {
    if (!doc["both_primary"].is_boolean())
      throw ParseError("line " + std::to_string(line_no) +
                       ": field both_primary must be a boolean");
    example.both_primary = doc["both_primary"].get<bool>();
  }
  return example;
}

// Structural invariants that hold without a taxonomy: spans in range and
// disjoint, one primary flag in slot 0.
void check_structure(const MultiIntentExample& example, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  if (example.tokens.empty()) throw ValidationError(where + "no tokens");
  if (example.triplets.empty()) throw ValidationError(where + "no intent triplets");
  std::size_t primary_count = 0;
  std::vector<bool> covered(example.tokens.size(), false);
  for (const auto& t : example.triplets) {
    if (t.primary) ++primary_count;
    if (t.start > t.end) throw ValidationError(where + "span start > end");
    if (t.end >= example.tokens.size())
      throw ValidationError(where + "span exceeds sentence length");
    for (std::size_t j = t.start; j <= t.end; ++j) {
      if (covered[j]) throw ValidationError(where + "overlapping spans");
      covered[j] = true;
    }
  }
  if (primary_count != 1)
    throw ValidationError(where + "expected exactly one primary triplet, found " +
                          std::to_string(primary_count));
  if (!example.triplets.front().primary)
    throw ValidationError(where + "primary triplet must occupy slot 0");
}

}  // namespace

DatasetSplit load_jsonl(const std::string& path, SplitName name) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  DatasetSplit split;
  split.name = name;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MultiIntentExample example = parse_example_line(line, line_no);
    check_structure(example, line_no);
    if (!ids.insert(example.id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" +
                            example.id + "'");
    split.examples.push_back(std::move(example));
  }
  return split;
}

void save_jsonl(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const auto& example : split.examples) {
    ordered_json doc;
    doc["id"] = example.id;
    doc["tokens"] = example.tokens;
    doc["language"] = language_name(example.language);
    ordered_json intents = ordered_json::array();
    for (const auto& t : example.triplets) {
      ordered_json entry;
      entry["start"] = t.start;
      entry["end"] = t.end;
      entry["coarse"] = t.coarse;
      entry["fine"] = t.fine;
      entry["primary"] = t.primary;
      intents.push_back(std::move(entry));
    }
    doc["intents"] = std::move(intents);
    if (example.both_primary) doc["both_primary"] = true;
    out << doc.dump() << "\n";
  }
}

std::vector<Utterance> load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<Utterance> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    Utterance u;
    const json& text = require_field(doc, "text", line_no);
    const json& fine = require_field(doc, "fine", line_no);
    const json& language = require_field(doc, "language", line_no);
    if (!text.is_string() || !fine.is_string() || !language.is_string())
      throw ParseError("line " + std::to_string(line_no) + ": fields must be strings");
    u.text = text.get<std::string>();
    u.fine_intent = fine.get<std::string>();
    u.language = parse_language(language.get<std::string>());
    if (doc.contains("primary")) {
      if (!doc["primary"].is_boolean())
        throw ParseError("line " + std::to_string(line_no) + ": field primary must be a boolean");
      u.primary = doc["primary"].get<bool>();
    }
    if (trim_label(u.text).empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty text");
    pool.push_back(std::move(u));
  }
  return pool;
}

DatasetSplit sample_k_shot(const DatasetSplit& split, std::size_t k, KShotKey key,
                           std::uint64_t rng_seed) {
  if (k == 0) throw ValidationError("sample_k_shot: k must be >= 1");

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < split.examples.size(); ++i) {
    const auto& primary = split.examples[i].triplets.front();
    const std::string& label = key == KShotKey::kFine ? primary.fine : primary.coarse;
    by_label[label].push_back(i);
  }

  std::mt19937_64 rng(rng_seed);
  std::vector<bool> selected(split.examples.size(), false);
  for (auto& [label, indices] : by_label) {
    const std::size_t take = std::min(k, indices.size());
    for (std::size_t j = 0; j < take; ++j) {
      std::size_t pick = j + static_cast<std::size_t>(uniform_below(rng, indices.size() - j));
      std::swap(indices[j], indices[pick]);
      selected[indices[j]] = true;
    }
  }

  DatasetSplit out;
  out.name = split.name;
  for (std::size_t i = 0; i < split.examples.size(); ++i)
    if (selected[i]) out.examples.push_back(split.examples[i]);
  return out;
}

Vocab build_vocab(const DatasetSplit& split, std::size_t min_count) {
  if (min_count == 0) throw ValidationError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& example : split.examples)
    for (const auto& token : example.tokens) ++counts[token];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : counts)
    if (count >= min_count) kept.emplace_back(token, count);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab vocab;
  vocab.index_to_token = {"<pad>", "<unk>"};
  for (auto& [token, count] : kept) vocab.index_to_token.push_back(token);
  for (std::size_t i = 0; i < vocab.index_to_token.size(); ++i)
    vocab.token_to_index[vocab.index_to_token[i]] = i;
  return vocab;
}

}  // namespace intentspan
