#include "r2d/eval/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>

#include "r2d/data/grammar.hpp"
#include "r2d/errors.hpp"
#include "r2d/seq2seq/vocab.hpp"

namespace r2d::eval {

namespace {

void check_paired(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
  if (a == 0) throw ContractError(std::string(what) + ": empty input");
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NGramCounts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

bool contains_tokens(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

std::vector<std::string> metric_tokens(const std::string& text) {
  auto tokens = seq2seq::split_tokens(text);
  for (auto& t : tokens) {
    for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return tokens;
}

std::string normalize_label(const std::string& text) {
  std::string out;
  for (const auto& t : metric_tokens(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

double accuracy(std::span<const std::string> preds, std::span<const std::string> golds) {
  check_paired(preds.size(), golds.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += normalize_label(preds[i]) == normalize_label(golds[i]);
  return ratio(hits, preds.size());
}

F1Result macro_f1(std::span<const std::string> preds, std::span<const std::string> golds,
                  std::span<const std::string> label_set) {
  check_paired(preds.size(), golds.size(), "macro_f1");
  std::vector<std::string> classes;
  std::set<std::string> known;
  auto add_class = [&](const std::string& label) {
    if (known.insert(label).second) classes.push_back(label);
  };
  for (const auto& l : label_set) add_class(normalize_label(l));
  if (label_set.empty()) {
    for (const auto& g : golds) add_class(normalize_label(g));
  }

  std::map<std::string, ClassScores> table;
  F1Result result;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string gold = normalize_label(golds[i]);
    if (!known.contains(gold)) throw ContractError("macro_f1: gold label '" + golds[i] + "' not in label set");
    std::string pred = normalize_label(preds[i]);
    if (!known.contains(pred)) {
      pred = kInvalidLabel;
      ++result.invalid_predictions;
    }
    ++table[gold].support;
    if (pred == gold) {
      ++table[gold].tp;
    } else {
      ++table[pred].fp;
      ++table[gold].fn;
    }
  }
  if (result.invalid_predictions > 0) classes.push_back(kInvalidLabel);

  double sum = 0.0;
  for (const auto& label : classes) {
    auto it = table.find(label);
    if (it == table.end()) continue;  // in the label set but never seen
    ClassScores s = it->second;
    s.label = label;
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum += s.f1;
    result.per_class.push_back(s);
  }
  result.macro_f1 = sum / static_cast<double>(result.per_class.size());
  return result;
}

double bleu(std::span<const std::string> candidates, std::span<const std::string> references) {
  check_paired(candidates.size(), references.size(), "bleu");
  std::array<std::size_t, 4> matches{}, totals{};
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = seq2seq::split_tokens(candidates[i]);
    const auto ref = seq2seq::split_tokens(references[i]);
    cand_len += cand.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto ref_counts = ngrams(ref, n);
      for (const auto& [gram, count] : ngrams(cand, n)) {
        auto it = ref_counts.find(gram);
        matches[n - 1] += it == ref_counts.end() ? 0 : std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    const double p = matches[n] > 0 ? ratio(matches[n], totals[n])
                                    : 1.0 / static_cast<double>(totals[n] + 1);
    log_sum += std::log(p) / 4.0;
  }
  const double bp = cand_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len))
                        : 1.0;
  return bp * std::exp(log_sum);
}

double unigram_overlap_f1(const std::string& candidate, const std::string& reference) {
  const auto cand = metric_tokens(candidate);
  const auto ref = metric_tokens(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  std::map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : cand) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = ratio(overlap, cand.size());
  const double r = ratio(overlap, ref.size());
  return 2.0 * p * r / (p + r);
}

double rationale_label_consistency(std::span<const std::string> rationales,
                                   std::span<const std::string> conditioning_labels,
                                   const std::map<std::string, std::string>& markers,
                                   UnknownLabelPolicy policy) {
  check_paired(rationales.size(), conditioning_labels.size(), "rationale_label_consistency");
  std::map<std::string, std::vector<std::string>> marker_tokens;
  for (const auto& [label, marker] : markers) {
    if (metric_tokens(marker).empty()) throw ContractError("label '" + label + "' has an empty marker");
    marker_tokens[normalize_label(label)] = metric_tokens(marker);
  }
  std::size_t consistent = 0;
  for (std::size_t i = 0; i < rationales.size(); ++i) {
    auto own = marker_tokens.find(normalize_label(conditioning_labels[i]));
    if (own == marker_tokens.end()) {
      if (policy == UnknownLabelPolicy::Error) {
        throw ContractError("label '" + conditioning_labels[i] + "' has no marker");
      }
      continue;
    }
    const auto tokens = metric_tokens(rationales[i]);
    bool ok = contains_tokens(tokens, own->second);
    for (auto it = marker_tokens.begin(); ok && it != marker_tokens.end(); ++it) {
      if (it != own && contains_tokens(tokens, it->second)) ok = false;
    }
    consistent += ok;
  }
  return ratio(consistent, rationales.size());
}

double rationale_label_consistency(std::span<const std::string> rationales,
                                   std::span<const std::string> conditioning_labels,
                                   const data::GrammarConfig& grammar, UnknownLabelPolicy policy) {
  return rationale_label_consistency(rationales, conditioning_labels, grammar.markers(), policy);
}

}  // namespace r2d::eval
