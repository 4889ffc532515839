#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "r2d/data/example.hpp"
#include "r2d/tensor/rng.hpp"

namespace r2d::curriculum {

struct TaskModel;

enum class LabelSource { Gold, Predicted };

struct ConditioningChoice {
  std::string label;
  LabelSource source = LabelSource::Gold;
};

/// Predicts label texts for a batch of examples (greedy, outside any
/// recording tape).
using LabelPredictor = std::function<std::vector<std::string>(std::span<const data::Example* const>)>;

/// Draws u = rng.uniform(); returns the predicted label when u < pi, else the
/// gold label. Throws ContractError if pi is outside [0, 1].
ConditioningChoice choose_conditioning_label(const data::Example& example, double pi, tensor::Rng& rng,
                                             const LabelPredictor& predict);

/// Batch form: one draw per example in order, then a single predictor call
/// for the examples that took the predicted branch.
std::vector<ConditioningChoice> choose_conditioning_labels(std::span<const data::Example* const> batch,
                                                           double pi, tensor::Rng& rng,
                                                           const LabelPredictor& predict);

/// Greedy "predict: {x}" decoding with the model's current parameters.
LabelPredictor greedy_label_predictor(const TaskModel& model);

}  // namespace r2d::curriculum
