#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "intentspan/errors.hpp"
#include "intentspan/taxonomy.hpp"

namespace intentspan {

enum class Language { kEn, kEs, kTh, kOther };

std::string language_name(Language lang);
Language parse_language(const std::string& name);

/// One single-intent source utterance from a pool.
struct Utterance {
  std::string text;
  std::string fine_intent;
  Language language = Language::kEn;
  /// Only consulted by the `annotated` primary policy.
  bool primary = false;
};

/// One (span, coarse, fine) triplet. Token indices are 0-based and
/// inclusive on both ends.
struct IntentSpanTriplet {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string coarse;
  std::string fine;
  bool primary = false;

  friend bool operator==(const IntentSpanTriplet&, const IntentSpanTriplet&) = default;
};

/// One multi-intent query with its gold triplets. Slot 0 holds the
/// primary triplet; spans are pairwise non-overlapping.
struct MultiIntentExample {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<IntentSpanTriplet> triplets;
  Language language = Language::kEn;
  /// Set when the source annotation marked several intents primary and
  /// the synthesizer had to designate one.
  bool both_primary = false;

  friend bool operator==(const MultiIntentExample&, const MultiIntentExample&) = default;
};

enum class SplitName { kTrain, kDev, kTest };

std::string split_name_string(SplitName name);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<MultiIntentExample> examples;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Token-to-index mapping with PAD=0 and UNK=1 reserved.
struct Vocab {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  std::vector<std::string> index_to_token;  // [0]="<pad>", [1]="<unk>"
  std::unordered_map<std::string, std::size_t> token_to_index;

  std::size_t size() const { return index_to_token.size(); }
  std::size_t lookup(const std::string& token) const {
    auto it = token_to_index.find(token);
    return it == token_to_index.end() ? kUnk : it->second;
  }
};

enum class PrimaryPolicy { kSecondSpanPrimary, kFirstSpanPrimary, kAnnotated };

std::string primary_policy_name(PrimaryPolicy policy);
PrimaryPolicy parse_primary_policy(const std::string& name);

/// Splits on Unicode whitespace; punctuation stays attached to words.
/// Empty text yields an empty list.
std::vector<std::string> tokenize(const std::string& text);

/// Validates one example against the type invariants (exactly one
/// primary in slot 0, disjoint in-range spans, coarse = coarse_of(fine)).
/// Throws ValidationError naming the example id on failure.
void validate_example(const MultiIntentExample& example, const Taxonomy& taxonomy);

/// Validates every example in the split plus id uniqueness.
void validate_split(const DatasetSplit& split, const Taxonomy& taxonomy);

/// Splices `utterances` (in textual order) into one multi-intent example.
/// Requires pairwise-distinct coarse labels and a single language.
/// Joiner tokens belong to no span.
MultiIntentExample synthesize_many(const std::vector<Utterance>& utterances,
                                   const Taxonomy& taxonomy, const std::string& joiner,
                                   PrimaryPolicy policy, std::string id);

/// Two-utterance convenience wrapper around synthesize_many.
MultiIntentExample synthesize_pair(const Utterance& u1, const Utterance& u2,
                                   const Taxonomy& taxonomy, const std::string& joiner,
                                   PrimaryPolicy policy, std::uint64_t rng_seed);

struct CorpusCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

struct CorpusOptions {
  std::size_t n_intents = 2;
  std::string joiner = ", ";
  PrimaryPolicy policy = PrimaryPolicy::kSecondSpanPrimary;
  std::uint64_t seed = 0;
};

/// Builds train/dev/test splits by sampling utterance tuples from the
/// pool. Deterministic under (pool order, seed); no tuple is reused
/// across splits. n_intents = 1 wraps single utterances.
std::vector<DatasetSplit> build_corpus(const std::vector<Utterance>& pool,
                                       const Taxonomy& taxonomy, const CorpusCounts& counts,
                                       const CorpusOptions& options);

/// JSONL persistence. One example per line:
///   {"id","tokens","language","intents":[{"start","end","coarse","fine","primary"}]}
/// plus optional "both_primary". Files are UTF-8, LF-terminated.
DatasetSplit load_jsonl(const std::string& path, SplitName name);
void save_jsonl(const DatasetSplit& split, const std::string& path);

/// Pool files are JSONL: {"text": str, "fine": str, "language": str}
/// with optional "primary": bool for the annotated policy.
std::vector<Utterance> load_pool(const std::string& path);

enum class KShotKey { kFine, kCoarse };

/// Per label of the primary triplet (fine or coarse as keyed), keeps
/// min(k, available) examples chosen uniformly without replacement.
/// Deterministic under seed; output preserves split order.
DatasetSplit sample_k_shot(const DatasetSplit& split, std::size_t k, KShotKey key,
                           std::uint64_t rng_seed);

/// Tokens with frequency >= min_count, indices in descending-frequency
/// order with lexicographic tie-break, after PAD=0 and UNK=1.
Vocab build_vocab(const DatasetSplit& split, std::size_t min_count);

/// Uniform integer in [0, n) from a seeded engine. Rejection sampling,
/// so results do not depend on the standard library's distribution.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

}  // namespace intentspan
