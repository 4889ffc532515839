#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "r2d/curriculum/task.hpp"

namespace r2d::curriculum {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  TaskModel model;
  /// Effective run configuration, stored verbatim.
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t step = 0;
  /// Validation Macro-F1 (Stage-2) or validation loss (Stage-1).
  double validation_score = 0.0;
  std::string validation_metric = "macro_f1";
  std::uint64_t rng_state = 0;
};

/// File layout: one line of compact JSON (the manifest) terminated by '\n',
/// then the parameters as little-endian float32 values in manifest order.
/// The manifest holds the format version, run config, step, validation score,
/// Rng state, model config, vocabulary, labels, markers, and a tensor table
/// with name, shape, dtype and byte offset into the payload.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws FormatError on a version mismatch or inconsistent manifest and
/// IoError if the file cannot be read.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Raw payload bytes of a checkpoint file.
std::vector<std::uint8_t> checkpoint_payload(const std::filesystem::path& path);

/// Parameters rounded through float32, as a save/load cycle would.
void round_to_storage(tensor::ParameterSet& params);

}  // namespace r2d::curriculum
