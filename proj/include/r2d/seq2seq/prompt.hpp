#pragma once

#include <string>
#include <string_view>
#include <variant>

namespace r2d::seq2seq {

struct Predict {};
struct ExplainUnconditioned {};
struct ExplainGivenLabel {
  std::string label;
};

using PromptKind = std::variant<Predict, ExplainUnconditioned, ExplainGivenLabel>;

/// Renders the task prefix for an input text:
///   Predict                -> "predict: {x}"
///   ExplainUnconditioned   -> "explain: {x}"
///   ExplainGivenLabel(y)   -> "given label: {y}, explain: {x}"
/// Throws ContractError for an empty input.
std::string format_prompt(const PromptKind& kind, std::string_view input_text);

}  // namespace r2d::seq2seq
