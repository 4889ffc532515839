#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace r2d::data {
struct GrammarConfig;
}

namespace r2d::eval {

/// Class name for predictions that match no known label.
inline constexpr const char* kInvalidLabel = "<invalid>";

/// Lowercased tokens (tokenizer rules) joined by single spaces.
std::string normalize_label(const std::string& text);
/// Lowercased tokens under the tokenizer rules.
std::vector<std::string> metric_tokens(const std::string& text);

/// Fraction of positions whose normalized prediction equals the normalized gold.
double accuracy(std::span<const std::string> preds, std::span<const std::string> golds);

struct ClassScores {
  std::string label;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;  // gold count
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Result {
  double macro_f1 = 0.0;
  /// Classes seen in golds or (mapped) predictions: label-set order, then INVALID.
  std::vector<ClassScores> per_class;
  std::size_t invalid_predictions = 0;
};

/// Macro-F1 over the classes present in golds ∪ mapped predictions.
///
/// Predictions are normalized and mapped onto `label_set`; anything else is
/// INVALID. Zero denominators give 0. An empty `label_set` means the distinct
/// gold labels. Golds outside a non-empty label set raise ContractError.
F1Result macro_f1(std::span<const std::string> preds, std::span<const std::string> golds,
                  std::span<const std::string> label_set = {});

/// Corpus BLEU-4 with uniform weights and add-one smoothing on orders with no
/// matches. An all-empty candidate corpus scores 0.
double bleu(std::span<const std::string> candidates, std::span<const std::string> references);

/// F1 of the multiset overlap of lowercased tokens; 0 if either side is empty.
double unigram_overlap_f1(const std::string& candidate, const std::string& reference);

/// What rationale_label_consistency does with a label that has no marker.
enum class UnknownLabelPolicy { Error, CountInconsistent };

/// Fraction of rationales containing the marker of their conditioning label
/// and no other label's marker. Markers are keyed by label text (normalized).
double rationale_label_consistency(std::span<const std::string> rationales,
                                   std::span<const std::string> conditioning_labels,
                                   const std::map<std::string, std::string>& markers,
                                   UnknownLabelPolicy policy = UnknownLabelPolicy::Error);
double rationale_label_consistency(std::span<const std::string> rationales,
                                   std::span<const std::string> conditioning_labels,
                                   const data::GrammarConfig& grammar,
                                   UnknownLabelPolicy policy = UnknownLabelPolicy::Error);

}  // namespace r2d::eval
