#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "r2d/data/example.hpp"
#include "r2d/seq2seq/model.hpp"
#include "r2d/seq2seq/vocab.hpp"

namespace r2d::curriculum {

/// Training recipes.
///   full                   Stage-1, then Stage-2 with both schedules
///   sft                    prediction loss only, no rationales
///   no-stage1              Stage-2 from random initialization
///   no-scheduled-sampling  Stage-2 with pi fixed at 0
///   no-warmup              alpha fixed at alpha_max; pi schedule unchanged
///   dss-style              prediction plus "explain: {x}" rationale loss with
///                          equal weights, never label-conditioned
enum class Variant { Full, Sft, NoStage1, NoScheduledSampling, NoWarmup, DssStyle };

const std::vector<Variant>& all_variants();
std::string to_string(Variant v);
/// Throws ConfigError for an unknown name.
Variant parse_variant(const std::string& name);

bool runs_stage1(Variant v);
bool uses_rationales(Variant v);
/// Whether the rationale prompt embeds a label.
bool label_conditioned(Variant v);

/// Everything needed to run a trained model on raw text.
struct TaskModel {
  seq2seq::ModelParams params;
  seq2seq::Vocab vocab;
  std::vector<std::string> labels;
  /// Label -> marker phrase; empty for corpora without markers.
  std::map<std::string, std::string> markers;
  Variant variant = Variant::Full;
  /// Decode budgets, in tokens.
  std::size_t max_label_tokens = 8;
  std::size_t max_rationale_tokens = 32;
};

/// Prompt of the rationale step for a given conditioning label.
std::string rationale_prompt(const TaskModel& model, const std::string& conditioning_label,
                             const std::string& input_text);

/// Token sequences of one example, prepared once.
struct EncodedExample {
  seq2seq::TokenSeq predict_prompt;
  seq2seq::TokenSeq explain_prompt;  // "explain: {x}"
  seq2seq::TokenSeq label;
  seq2seq::TokenSeq rationale;
};

struct TaskData {
  std::vector<data::Example> examples;
  std::vector<EncodedExample> encoded;
  std::size_t size() const { return examples.size(); }
};

/// Encodes examples; throws ContractError if a label or rationale is empty or
/// any sequence could exceed `max_len`, counting conditioning labels of up to
/// `label_budget` tokens.
TaskData prepare_task_data(std::span<const data::Example> examples, const seq2seq::Vocab& vocab,
                           std::size_t max_len, std::size_t label_budget = 0);

/// Vocabulary over the inputs, labels and rationales of `examples`.
seq2seq::Vocab build_task_vocab(std::span<const data::Example> examples);

/// Distinct gold labels in first-seen order.
std::vector<std::string> collect_labels(std::span<const data::Example> examples);

}  // namespace r2d::curriculum
