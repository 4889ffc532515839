#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "r2d/curriculum/trainer.hpp"
#include "r2d/data/split.hpp"
#include "r2d/seq2seq/model.hpp"

namespace r2d::cli {

struct DataConfig {
  /// Grammar JSON file; empty selects the built-in grammar.
  std::string grammar;
  std::size_t synthetic_examples = 3000;
  data::SplitFractions fractions{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
  /// Directory holding train/val/test.jsonl (as written by gen-data).
  std::string dir;
  /// Explicit JSONL files; take precedence over `dir`.
  std::string train_jsonl;
  std::string val_jsonl;
  std::string test_jsonl;

  friend bool operator==(const DataConfig& a, const DataConfig& b) {
    return a.grammar == b.grammar && a.synthetic_examples == b.synthetic_examples &&
           a.fractions.train == b.fractions.train && a.fractions.val == b.fractions.val &&
           a.fractions.test == b.fractions.test && a.dir == b.dir && a.train_jsonl == b.train_jsonl &&
           a.val_jsonl == b.val_jsonl && a.test_jsonl == b.test_jsonl;
  }
};

struct AblationConfig {
  std::vector<curriculum::Variant> variants{curriculum::Variant::Full, curriculum::Variant::Sft,
                                            curriculum::Variant::NoStage1,
                                            curriculum::Variant::NoScheduledSampling};
  std::vector<std::uint64_t> seeds{0, 1, 2};

  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

/// Top-level run configuration. Every field has a default; unknown keys are
/// rejected at every nesting level. Layout:
///   seed, variant, out_dir,
///   model    {encoder_layers, decoder_layers, d_model, heads, d_ff, max_len}
///   train    {batch_size, lr, beta1, beta2, epsilon, weight_decay, clip_norm,
///             stage1_max_steps, stage1_eval_interval, stage1_patience,
///             stage2_patience, min_improvement,
///             schedule {total_steps, warmup_fraction, transition_fraction,
///                       pi_ceiling, alpha_max}}
///   data     {grammar, synthetic_examples, fractions {train, val, test},
///             dir, train_jsonl, val_jsonl, test_jsonl}
///   ablation {variants, seeds}
struct RunConfig {
  std::uint64_t seed = 0;
  curriculum::Variant variant = curriculum::Variant::Full;
  std::string out_dir = "r2d-out";
  seq2seq::ModelConfig model;
  curriculum::TrainConfig train;  // its seed and variant mirror the fields above
  DataConfig data;
  AblationConfig ablation;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  /// Defaults when `path` is empty.
  static RunConfig load(const std::filesystem::path& path);

  /// The training config with seed and variant applied.
  curriculum::TrainConfig train_config() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace r2d::cli
