#include "intentspan/taxonomy.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace intentspan {

using nlohmann::json;

std::string trim_label(const std::string& raw) {
  const char* ws = " \t\r\n";
  auto begin = raw.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = raw.find_last_not_of(ws);
  return raw.substr(begin, end - begin + 1);
}

Taxonomy::Taxonomy(std::string dataset_name,
                   std::map<std::string, std::vector<std::string>> coarse_to_fine)
    : dataset_name_(std::move(dataset_name)) {
  for (auto& [coarse_raw, fines_raw] : coarse_to_fine) {
    std::string coarse = trim_label(coarse_raw);
    if (coarse.empty()) throw ValidationError("taxonomy: empty coarse label name");
    if (coarse_to_fine_.count(coarse))
      throw ValidationError("taxonomy: duplicate coarse label '" + coarse + "'");
    std::vector<std::string> fines;
    fines.reserve(fines_raw.size());
    for (const auto& f : fines_raw) {
      std::string fine = trim_label(f);
      if (fine.empty())
        throw ValidationError("taxonomy: empty fine label under coarse '" + coarse + "'");
      fines.push_back(std::move(fine));
    }
    if (fines.empty())
      throw ValidationError("taxonomy: empty coarse cluster '" + coarse + "'");
    std::sort(fines.begin(), fines.end());
    coarse_to_fine_.emplace(std::move(coarse), std::move(fines));
  }
  if (coarse_to_fine_.empty()) throw ValidationError("taxonomy: no coarse labels");

  for (const auto& [coarse, fines] : coarse_to_fine_) {
    coarse_labels_.push_back(coarse);
    for (const auto& fine : fines) {
      auto [it, inserted] = fine_to_coarse_.emplace(fine, coarse);
      if (!inserted)
        throw ValidationError("taxonomy: duplicate fine label '" + fine + "' (under '" +
                              it->second + "' and '" + coarse + "')");
      fine_labels_.push_back(fine);
    }
  }
  std::sort(fine_labels_.begin(), fine_labels_.end());
  for (const auto& fine : fine_labels_) {
    if (coarse_to_fine_.count(fine))
      throw ValidationError("taxonomy: label '" + fine +
                            "' appears as both a coarse and a fine label");
  }
}

bool Taxonomy::has_fine(const std::string& fine) const {
  return fine_to_coarse_.count(fine) > 0;
}

bool Taxonomy::has_coarse(const std::string& coarse) const {
  return coarse_to_fine_.count(coarse) > 0;
}

const std::string& Taxonomy::coarse_of(const std::string& fine) const {
  auto it = fine_to_coarse_.find(fine);
  if (it == fine_to_coarse_.end())
    throw ValidationError("taxonomy: unknown fine label '" + fine + "'");
  return it->second;
}

std::size_t Taxonomy::coarse_index(const std::string& coarse) const {
  auto it = std::lower_bound(coarse_labels_.begin(), coarse_labels_.end(), coarse);
  if (it == coarse_labels_.end() || *it != coarse)
    throw ValidationError("taxonomy: unknown coarse label '" + coarse + "'");
  return static_cast<std::size_t>(it - coarse_labels_.begin());
}

std::size_t Taxonomy::fine_index(const std::string& fine) const {
  auto it = std::lower_bound(fine_labels_.begin(), fine_labels_.end(), fine);
  if (it == fine_labels_.end() || *it != fine)
    throw ValidationError("taxonomy: unknown fine label '" + fine + "'");
  return static_cast<std::size_t>(it - fine_labels_.begin());
}

Taxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("taxonomy: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("taxonomy: '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("dataset") || !doc.contains("coarse_to_fine"))
    throw ParseError("taxonomy: '" + path +
                     "' must be an object with 'dataset' and 'coarse_to_fine'");
  if (!doc["dataset"].is_string() || !doc["coarse_to_fine"].is_object())
    throw ParseError("taxonomy: '" + path + "' has wrong field types");

  std::map<std::string, std::vector<std::string>> mapping;
  for (const auto& [coarse, fines] : doc["coarse_to_fine"].items()) {
    if (!fines.is_array())
      throw ParseError("taxonomy: cluster '" + coarse + "' must be an array");
    std::vector<std::string> list;
    for (const auto& f : fines) {
      if (!f.is_string())
        throw ParseError("taxonomy: cluster '" + coarse + "' contains a non-string entry");
      list.push_back(f.get<std::string>());
    }
    mapping[coarse] = std::move(list);
  }
  return Taxonomy(doc["dataset"].get<std::string>(), std::move(mapping));
}

void save_taxonomy(const Taxonomy& taxonomy, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["dataset"] = taxonomy.dataset_name();
  nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
  for (const auto& [coarse, fines] : taxonomy.coarse_to_fine()) mapping[coarse] = fines;
  doc["coarse_to_fine"] = std::move(mapping);
  std::ofstream out(path);
  if (!out) throw Error("taxonomy: cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

ValidationResult validate_expected_sizes(const Taxonomy& taxonomy,
                                         std::size_t expected_coarse) {
  ValidationResult result;
  result.actual = taxonomy.coarse_count();
  result.passed = result.actual == expected_coarse;
  if (result.passed) {
    result.message = "coarse label count is " + std::to_string(result.actual);
  } else {
    result.message = "expected " + std::to_string(expected_coarse) +
                     " coarse labels, actual " + std::to_string(result.actual);
  }
  return result;
}

}  // namespace intentspan
