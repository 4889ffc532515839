#pragma once

#include <string>

namespace r2d::data {

/// One supervised instance: note text, gold label, gold rationale.
struct Example {
  std::string id;
  std::string input_text;
  std::string gold_label;
  std::string gold_rationale;

  friend bool operator==(const Example&, const Example&) = default;
};

}  // namespace r2d::data
