#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "r2d/eval/metrics.hpp"

namespace r2d::eval {

struct MetricsReport {
  std::size_t examples = 0;
  std::size_t invalid_predictions = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassScores> per_class;
  double bleu = 0.0;
  /// Mean of per-example unigram-overlap F1.
  double unigram_overlap_f1 = 0.0;
  std::optional<double> consistency;

  /// Keys in a fixed order, so identical reports serialize identically.
  nlohmann::ordered_json to_json() const;
  /// Pretty-printed (2-space indent) with a trailing newline.
  std::string dump() const;
};

struct Predictions {
  std::vector<std::string> labels;
  std::vector<std::string> rationales;
};

/// Label metrics against `gold_labels`, rationale metrics against
/// `gold_rationales`. Consistency is included only when `markers` is given;
/// rationales are scored against the predicted labels they were conditioned on.
MetricsReport build_report(const Predictions& predictions, std::span<const std::string> gold_labels,
                           std::span<const std::string> gold_rationales,
                           std::span<const std::string> label_set,
                           const std::map<std::string, std::string>* markers = nullptr);

}  // namespace r2d::eval
