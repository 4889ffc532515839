#include "r2d/eval/report.hpp"

namespace r2d::eval {

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["examples"] = examples;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  j["bleu"] = bleu;
  j["unigram_overlap_f1"] = unigram_overlap_f1;
  j["consistency"] = consistency ? nlohmann::ordered_json(*consistency) : nlohmann::ordered_json();
  j["invalid_predictions"] = invalid_predictions;
  auto classes = nlohmann::ordered_json::array();
  for (const auto& c : per_class) {
    nlohmann::ordered_json row;
    row["label"] = c.label;
    row["precision"] = c.precision;
    row["recall"] = c.recall;
    row["f1"] = c.f1;
    row["support"] = c.support;
    row["tp"] = c.tp;
    row["fp"] = c.fp;
    row["fn"] = c.fn;
    classes.push_back(row);
  }
  j["per_class"] = classes;
  return j;
}

std::string MetricsReport::dump() const { return to_json().dump(2) + "\n"; }

MetricsReport build_report(const Predictions& predictions, std::span<const std::string> gold_labels,
                           std::span<const std::string> gold_rationales,
                           std::span<const std::string> label_set,
                           const std::map<std::string, std::string>* markers) {
  MetricsReport r;
  r.examples = gold_labels.size();
  r.accuracy = accuracy(predictions.labels, gold_labels);
  auto f1 = macro_f1(predictions.labels, gold_labels, label_set);
  r.macro_f1 = f1.macro_f1;
  r.per_class = std::move(f1.per_class);
  r.invalid_predictions = f1.invalid_predictions;
  r.bleu = bleu(predictions.rationales, gold_rationales);
  double overlap = 0.0;
  for (std::size_t i = 0; i < gold_rationales.size(); ++i) {
    overlap += unigram_overlap_f1(predictions.rationales[i], gold_rationales[i]);
  }
  r.unigram_overlap_f1 = overlap / static_cast<double>(gold_rationales.size());
  if (markers != nullptr) {
    r.consistency = rationale_label_consistency(predictions.rationales, predictions.labels, *markers,
                                                UnknownLabelPolicy::CountInconsistent);
  }
  return r;
}

}  // namespace r2d::eval
