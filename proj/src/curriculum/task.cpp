#include "r2d/curriculum/task.hpp"

#include <algorithm>

#include "r2d/errors.hpp"
#include "r2d/seq2seq/prompt.hpp"

namespace r2d::curriculum {

using seq2seq::format_prompt;

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Full,     Variant::Sft,      Variant::NoStage1,
                                      Variant::NoScheduledSampling, Variant::NoWarmup, Variant::DssStyle};
  return v;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Sft: return "sft";
    case Variant::NoStage1: return "no-stage1";
    case Variant::NoScheduledSampling: return "no-scheduled-sampling";
    case Variant::NoWarmup: return "no-warmup";
    case Variant::DssStyle: return "dss-style";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + name +
                    "' (expected full, sft, no-stage1, no-scheduled-sampling, no-warmup or dss-style)");
}

bool runs_stage1(Variant v) {
  return v == Variant::Full || v == Variant::NoScheduledSampling || v == Variant::NoWarmup;
}

bool uses_rationales(Variant v) { return v != Variant::Sft; }

bool label_conditioned(Variant v) { return v != Variant::Sft && v != Variant::DssStyle; }

std::string rationale_prompt(const TaskModel& model, const std::string& conditioning_label,
                             const std::string& input_text) {
  if (label_conditioned(model.variant)) {
    return format_prompt(seq2seq::ExplainGivenLabel{conditioning_label}, input_text);
  }
  return format_prompt(seq2seq::ExplainUnconditioned{}, input_text);
}

TaskData prepare_task_data(std::span<const data::Example> examples, const seq2seq::Vocab& vocab,
                           std::size_t max_len, std::size_t label_budget) {
  TaskData out;
  out.examples.assign(examples.begin(), examples.end());
  out.encoded.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample e{vocab.encode(format_prompt(seq2seq::Predict{}, ex.input_text)),
                     vocab.encode(format_prompt(seq2seq::ExplainUnconditioned{}, ex.input_text)),
                     vocab.encode(ex.gold_label), vocab.encode(ex.gold_rationale)};
    if (e.label.empty() || e.rationale.empty()) {
      throw ContractError("example '" + ex.id + "' has an empty label or rationale");
    }
    // The longest prompt is the label-conditioned one: "given label : y , explain : x".
    const std::size_t conditioned = e.explain_prompt.size() + std::max(e.label.size(), label_budget) + 3;
    const std::size_t longest_target = std::max(e.label.size(), e.rationale.size()) + 1;
    if (conditioned > max_len || longest_target > max_len) {
      throw ContractError("example '" + ex.id + "' exceeds the model length limit of " +
                          std::to_string(max_len) + " tokens");
    }
    out.encoded.push_back(std::move(e));
  }
  return out;
}

seq2seq::Vocab build_task_vocab(std::span<const data::Example> examples) {
  std::vector<std::string> texts;
  texts.reserve(examples.size() * 3);
  for (const auto& ex : examples) {
    texts.push_back(ex.input_text);
    texts.push_back(ex.gold_label);
    texts.push_back(ex.gold_rationale);
  }
  return seq2seq::Vocab::build(texts);
}

std::vector<std::string> collect_labels(std::span<const data::Example> examples) {
  std::vector<std::string> labels;
  for (const auto& ex : examples) {
    if (std::find(labels.begin(), labels.end(), ex.gold_label) == labels.end()) labels.push_back(ex.gold_label);
  }
  return labels;
}

}  // namespace r2d::curriculum
