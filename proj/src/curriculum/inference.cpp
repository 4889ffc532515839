#include "r2d/curriculum/inference.hpp"

#include "r2d/errors.hpp"
#include "r2d/seq2seq/decode.hpp"
#include "r2d/seq2seq/prompt.hpp"

namespace r2d::curriculum {

namespace {

std::vector<std::string> decode_texts(const TaskModel& model, std::span<const std::string> prompts,
                                      std::size_t max_tokens) {
  std::vector<seq2seq::TokenSeq> ids;
  ids.reserve(prompts.size());
  for (const auto& p : prompts) ids.push_back(model.vocab.encode(p));
  std::vector<std::string> out;
  out.reserve(prompts.size());
  for (const auto& seq : seq2seq::greedy_decode_batch(model.params, ids, max_tokens)) {
    out.push_back(model.vocab.decode(seq));
  }
  return out;
}

}  // namespace

std::vector<std::string> predict_labels(const TaskModel& model, std::span<const std::string> inputs) {
  if (inputs.empty()) return {};
  std::vector<std::string> prompts;
  prompts.reserve(inputs.size());
  for (const auto& x : inputs) prompts.push_back(seq2seq::format_prompt(seq2seq::Predict{}, x));
  return decode_texts(model, prompts, model.max_label_tokens);
}

std::vector<InferenceResult> infer_batch(const TaskModel& model, std::span<const std::string> inputs) {
  if (inputs.empty()) return {};
  const auto labels = predict_labels(model, inputs);
  std::vector<InferenceResult> out(inputs.size());
  std::vector<std::string> prompts;
  prompts.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out[i].label = labels[i];
    out[i].rationale_prompt = rationale_prompt(model, labels[i], inputs[i]);
    prompts.push_back(out[i].rationale_prompt);
  }
  const auto rationales = decode_texts(model, prompts, model.max_rationale_tokens);
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i].rationale = rationales[i];
  return out;
}

InferenceResult infer(const TaskModel& model, const std::string& input_text) {
  if (input_text.empty()) throw ContractError("infer: empty input");
  const std::string one[] = {input_text};
  return infer_batch(model, one).front();
}

}  // namespace r2d::curriculum
