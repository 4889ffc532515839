#include "r2d/curriculum/conditioning.hpp"

#include "r2d/curriculum/inference.hpp"
#include "r2d/errors.hpp"

namespace r2d::curriculum {

std::vector<ConditioningChoice> choose_conditioning_labels(std::span<const data::Example* const> batch,
                                                           double pi, tensor::Rng& rng,
                                                           const LabelPredictor& predict) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw ContractError("conditioning probability must be in [0, 1]");
  std::vector<ConditioningChoice> out(batch.size());
  std::vector<const data::Example*> to_predict;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (rng.uniform() < pi) {
      to_predict.push_back(batch[i]);
      slots.push_back(i);
    } else {
      out[i] = {batch[i]->gold_label, LabelSource::Gold};
    }
  }
  if (!to_predict.empty()) {
    const auto labels = predict(to_predict);
    if (labels.size() != to_predict.size()) throw ContractError("label predictor returned the wrong count");
    for (std::size_t k = 0; k < slots.size(); ++k) out[slots[k]] = {labels[k], LabelSource::Predicted};
  }
  return out;
}

ConditioningChoice choose_conditioning_label(const data::Example& example, double pi, tensor::Rng& rng,
                                             const LabelPredictor& predict) {
  const data::Example* one[] = {&example};
  return choose_conditioning_labels(one, pi, rng, predict).front();
}

LabelPredictor greedy_label_predictor(const TaskModel& model) {
  return [&model](std::span<const data::Example* const> batch) {
    std::vector<std::string> inputs;
    inputs.reserve(batch.size());
    for (const auto* ex : batch) inputs.push_back(ex->input_text);
    return predict_labels(model, inputs);
  };
}

}  // namespace r2d::curriculum
