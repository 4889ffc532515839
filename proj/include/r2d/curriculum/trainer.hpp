#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "r2d/curriculum/checkpoint.hpp"
#include "r2d/curriculum/conditioning.hpp"
#include "r2d/curriculum/schedule.hpp"
#include "r2d/curriculum/task.hpp"
#include "r2d/tensor/optimizer.hpp"

namespace r2d::curriculum {

struct TrainConfig {
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  tensor::AdamWConfig optimizer;
  /// Global-norm gradient clip; 0 disables.
  double clip_norm = 1.0;
  ScheduleConfig schedule;
  std::size_t stage1_max_steps = 1000;
  std::size_t stage1_eval_interval = 100;
  std::size_t stage1_patience = 3;
  std::size_t stage2_patience = 5;
  /// An evaluation improves only if it beats the best by more than this.
  double min_improvement = 1e-6;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Stage-2 validation interval: max(1, T / 50).
std::uint64_t stage2_eval_interval(const ScheduleConfig& schedule);
/// Completed-step count from which Stage-2 early stopping may fire: w + m for
/// scheduled-sampling recipes, 0 for sft and dss-style.
double early_stop_start(Variant variant, const ScheduleConfig& schedule);

struct Stage1Step {
  std::uint64_t step = 0;
  double loss = 0.0;
};

struct StepRecord {
  std::uint64_t t = 0;
  double pi = 0.0;
  double alpha = 0.0;
  double l_pred = 0.0;
  std::optional<double> l_expl;  // absent for sft
  double l_total = 0.0;
  std::size_t predicted = 0;  // conditioning labels from the model
  std::size_t gold = 0;
};

struct ValidationRecord {
  std::uint64_t step = 0;  // completed updates
  double score = 0.0;
};

struct TrainReport {
  Variant variant = Variant::Full;
  std::vector<Stage1Step> stage1_steps;
  std::vector<ValidationRecord> stage1_validation;  // validation loss
  std::optional<std::uint64_t> stage1_best_step;
  bool stage1_stopped_early = false;

  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validation;  // validation Macro-F1
  std::uint64_t selected_step = 0;
  double selected_score = 0.0;
  bool stopped_early = false;
  std::uint64_t stage2_steps_run = 0;
  std::string selected_checkpoint;

  std::size_t predicted_branch_total() const;
  nlohmann::ordered_json to_json() const;
};

struct Stage2Hooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const ValidationRecord&)> on_validation;
  /// Replaces greedy decoding of conditioning labels when set.
  LabelPredictor predictor;
};

/// Minimizes the "explain: {x}" rationale loss, validating every
/// stage1_eval_interval steps and stopping after stage1_patience evaluations
/// without a lower validation loss. `model.params` ends at the best
/// checkpoint, which is also returned. Throws ContractError for an empty
/// train or validation set and NumericError (naming the step) on divergence.
Checkpoint train_stage1(TaskModel& model, const TaskData& train, const TaskData& val,
                        const TrainConfig& cfg, TrainReport& report);

/// Joint Stage-2 optimization (variant-dependent) from `model.params` with
/// fresh optimizer moments. Returns the highest-validation-Macro-F1
/// checkpoint and leaves `model.params` at it.
Checkpoint train_stage2(TaskModel& model, const TaskData& train, const TaskData& val,
                        const TrainConfig& cfg, TrainReport& report, const Stage2Hooks& hooks = {});

struct StepLosses {
  double l_pred = 0.0;
  std::optional<double> l_expl;
  double l_total = 0.0;
};

/// Gradients of one Stage-2 batch given its conditioning labels.
tensor::Gradients stage2_gradients(const TaskModel& model, const TaskData& data,
                                   std::span<const std::size_t> batch,
                                   std::span<const ConditioningChoice> choices, double alpha,
                                   StepLosses& losses);

/// Mean "explain: {x}" rationale NLL over a data set (no gradients).
double rationale_loss(const TaskModel& model, const TaskData& data);
/// Macro-F1 of greedy label predictions over a data set.
double validation_macro_f1(const TaskModel& model, const TaskData& data);

struct TrainSetup {
  std::vector<data::Example> train;
  std::vector<data::Example> val;
  /// vocab_size is filled in from the training vocabulary.
  seq2seq::ModelConfig model;
  TrainConfig train_config;
  /// Label order for metrics; collected from the data when empty.
  std::vector<std::string> labels;
  std::map<std::string, std::string> markers;
  /// Stored in the checkpoint manifest.
  nlohmann::json run_config = nlohmann::json::object();
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

/// Builds the vocabulary and model, then runs the variant's stages.
TrainResult run_training(const TrainSetup& setup, const Stage2Hooks& hooks = {});

}  // namespace r2d::curriculum
