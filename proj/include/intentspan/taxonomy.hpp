#pragma once

#include <map>
#include <string>
#include <vector>

#include "intentspan/errors.hpp"

namespace intentspan {

enum class Granularity { kCoarse, kFine };

/// A canonical intent label. Labels are compared byte-exact after
/// trimming surrounding whitespace; no case folding.
struct IntentLabel {
  std::string name;
  Granularity granularity = Granularity::kFine;

  friend bool operator==(const IntentLabel&, const IntentLabel&) = default;
};

struct ValidationResult {
  bool passed = false;
  std::size_t actual = 0;
  std::string message;
};

/// Fine-to-coarse intent clustering for one dataset. Immutable after
/// construction; safe for concurrent reads.
class Taxonomy {
 public:
  Taxonomy(std::string dataset_name,
           std::map<std::string, std::vector<std::string>> coarse_to_fine);

  const std::string& dataset_name() const { return dataset_name_; }

  /// Coarse clusters keyed by coarse label, fine lists sorted.
  const std::map<std::string, std::vector<std::string>>& coarse_to_fine() const {
    return coarse_to_fine_;
  }

  /// Coarse labels in sorted order. Index order defines the coarse
  /// class space used by models.
  const std::vector<std::string>& coarse_labels() const { return coarse_labels_; }

  /// All fine labels in sorted order. Index order defines the fine
  /// class space used by models.
  const std::vector<std::string>& fine_labels() const { return fine_labels_; }

  std::size_t coarse_count() const { return coarse_labels_.size(); }
  std::size_t fine_count() const { return fine_labels_.size(); }

  bool has_fine(const std::string& fine) const;
  bool has_coarse(const std::string& coarse) const;

  /// The unique coarse label whose cluster contains `fine`.
  /// Throws ValidationError for an unknown fine label.
  const std::string& coarse_of(const std::string& fine) const;

  /// Class index of a label within its granularity's sorted space.
  std::size_t coarse_index(const std::string& coarse) const;
  std::size_t fine_index(const std::string& fine) const;

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
    return a.dataset_name_ == b.dataset_name_ && a.coarse_to_fine_ == b.coarse_to_fine_;
  }

 private:
  std::string dataset_name_;
  std::map<std::string, std::vector<std::string>> coarse_to_fine_;
  std::map<std::string, std::string> fine_to_coarse_;
  std::vector<std::string> coarse_labels_;
  std::vector<std::string> fine_labels_;
};

/// Loads a taxonomy from a UTF-8 JSON file of the form
///   {"dataset": str, "coarse_to_fine": {coarse: [fine, ...]}}.
/// Fine lists are sorted on load; key order in the file is not significant.
Taxonomy load_taxonomy(const std::string& path);

/// Writes the taxonomy in the same JSON format (sorted keys and lists).
void save_taxonomy(const Taxonomy& taxonomy, const std::string& path);

/// Passes iff the taxonomy has exactly `expected_coarse` coarse labels.
ValidationResult validate_expected_sizes(const Taxonomy& taxonomy,
                                         std::size_t expected_coarse);

/// Trims surrounding ASCII whitespace; used to canonicalize labels.
std::string trim_label(const std::string& raw);

}  // namespace intentspan
