#pragma once

#include <span>
#include <string>
#include <vector>

#include "r2d/curriculum/task.hpp"

namespace r2d::curriculum {

struct InferenceResult {
  std::string label;      // decoded verbatim, never remapped onto the label set
  std::string rationale;
  std::string rationale_prompt;
};

/// Greedy "predict: {x}" decoding of label texts.
std::vector<std::string> predict_labels(const TaskModel& model, std::span<const std::string> inputs);

/// Two-step inference: the label first, then a rationale conditioned on that
/// predicted label (or on "explain: {x}" for variants without conditioning).
/// Throws ContractError for an empty input.
InferenceResult infer(const TaskModel& model, const std::string& input_text);
std::vector<InferenceResult> infer_batch(const TaskModel& model, std::span<const std::string> inputs);

}  // namespace r2d::curriculum
