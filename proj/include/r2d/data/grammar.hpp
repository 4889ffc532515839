#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "r2d/data/example.hpp"

namespace r2d::data {

struct LabelSpec {
  std::string name;
  /// Phrase every rationale for this label contains; unique across labels.
  std::string marker;
  /// Decisive symptoms; a note's label is the label owning its symptom.
  std::vector<std::string> symptoms;

  friend bool operator==(const LabelSpec&, const LabelSpec&) = default;
};

/// Synthetic triage grammar.
///
/// Note templates use the placeholders {person}, {symptom} and {duration};
/// rationale templates use {symptom} and {marker}. After every non-symptom
/// template word a noise word is inserted with probability `noise_rate`.
/// Label k is drawn with weight imbalance^k (1.0 gives uniform labels).
struct GrammarConfig {
  std::vector<LabelSpec> labels;
  std::vector<std::string> note_templates;
  std::vector<std::string> rationale_templates;
  std::vector<std::string> persons;
  std::vector<std::string> durations;
  std::vector<std::string> noise_words;
  double noise_rate = 0.3;
  double imbalance = 1.0;
  std::uint64_t seed = 2024;

  /// Six urgency classes from home care to calling EMS.
  static GrammarConfig defaults();

  /// Throws ConfigError listing every failing invariant.
  void validate() const;

  std::vector<std::string> label_names() const;
  std::map<std::string, std::string> markers() const;
  /// Label owning `symptom`, or empty when no label does.
  std::string label_for_symptom(const std::string& symptom) const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static GrammarConfig from_json(const nlohmann::json& j);
  static GrammarConfig load(const std::filesystem::path& path);

  friend bool operator==(const GrammarConfig&, const GrammarConfig&) = default;
};

/// n examples, pure in (cfg, n). Each note holds exactly one decisive symptom
/// and the rationale embeds that symptom and the label's marker.
std::vector<Example> generate_synthetic(const GrammarConfig& cfg, std::size_t n);

/// Text with single spaces between whitespace-separated words, lowercased.
std::string normalize_text(const std::string& text);

/// Whether `phrase` occurs in `text` on word boundaries (both normalized).
bool contains_phrase(const std::string& text, const std::string& phrase);

}  // namespace r2d::data
