#include "r2d/seq2seq/prompt.hpp"

#include "r2d/errors.hpp"

namespace r2d::seq2seq {

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

std::string format_prompt(const PromptKind& kind, std::string_view input_text) {
  if (input_text.empty()) throw ContractError("format_prompt: empty input text");
  const std::string x(input_text);
  return std::visit(Overloaded{
                        [&](const Predict&) { return "predict: " + x; },
                        [&](const ExplainUnconditioned&) { return "explain: " + x; },
                        [&](const ExplainGivenLabel& g) {
                          return "given label: " + g.label + ", explain: " + x;
                        },
                    },
                    kind);
}

}  // namespace r2d::seq2seq
