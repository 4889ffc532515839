#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "r2d/data/example.hpp"

namespace r2d::data {

/// One JSON object per line with keys "input", "label", "rationale" and an
/// optional "id" (defaults to "line-<n>"). Blank lines are skipped. Malformed
/// lines and missing keys raise FormatError with the 1-based line number.
std::vector<Example> load_jsonl(const std::filesystem::path& path);

/// Writes examples in the load_jsonl schema, keys in a fixed order.
void write_jsonl(const std::filesystem::path& path, std::span<const Example> examples);

}  // namespace r2d::data
