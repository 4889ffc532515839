#include "r2d/curriculum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "r2d/curriculum/inference.hpp"
#include "r2d/errors.hpp"
#include "r2d/eval/metrics.hpp"
#include "r2d/seq2seq/prompt.hpp"

namespace r2d::curriculum {

using seq2seq::TokenSeq;
using tensor::Rng;
using tensor::Tape;
using tensor::Var;

namespace {

constexpr std::size_t kEvalChunk = 64;

/// Independent stream k of a run seed.
Rng stream(std::uint64_t seed, int k) {
  Rng root(seed);
  for (int i = 0; i < k; ++i) root.split();
  return root.split();
}

enum Stream { kInit = 0, kStage1Data = 1, kStage2Data = 2, kSampling = 3 };

/// Endless shuffled passes over [0, n).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, Rng rng) : n_(n), batch_(std::min(batch, n)), rng_(rng) {
    reshuffle();
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    cursor_ = 0;
  }

  std::size_t n_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

void apply_update(TaskModel& model, tensor::Gradients& grads, tensor::OptimizerState& opt, const TrainConfig& cfg) {
  if (cfg.clip_norm > 0.0) tensor::clip_global_norm(grads, cfg.clip_norm);
  tensor::optimizer_step(model.params.tensors, grads, opt);
}

template <class Fn>
auto at_step(std::uint64_t step, const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + " diverged at step " + std::to_string(step) + ": " + e.what());
  }
}

void require_data(const TaskData& train, const TaskData& val, const char* stage) {
  if (train.size() == 0) throw ContractError(std::string(stage) + ": empty training set");
  if (val.size() == 0) throw ContractError(std::string(stage) + ": empty validation set");
}

Checkpoint snapshot(const TaskModel& model, std::uint64_t step, double score, const char* metric,
                    const Rng& rng) {
  Checkpoint c;
  c.model = model;
  c.step = step;
  c.validation_score = score;
  c.validation_metric = metric;
  c.rng_state = rng.state();
  return c;
}

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(optimizer.lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("train: beta1 must be in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("train: beta2 must be in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw ConfigError("train: epsilon must be positive");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be >= 0");
  if (stage1_eval_interval == 0) throw ConfigError("train: stage1_eval_interval must be positive");
  if (stage1_patience == 0 || stage2_patience == 0) throw ConfigError("train: patience must be positive");
  if (!(min_improvement >= 0.0)) throw ConfigError("train: min_improvement must be >= 0");
  schedule.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"seed", seed},
          {"batch_size", batch_size},
          {"lr", optimizer.lr},
          {"beta1", optimizer.beta1},
          {"beta2", optimizer.beta2},
          {"epsilon", optimizer.epsilon},
          {"weight_decay", optimizer.weight_decay},
          {"clip_norm", clip_norm},
          {"schedule", schedule.to_json()},
          {"stage1_max_steps", stage1_max_steps},
          {"stage1_eval_interval", stage1_eval_interval},
          {"stage1_patience", stage1_patience},
          {"stage2_patience", stage2_patience},
          {"min_improvement", min_improvement}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "variant",   "seed",           "batch_size",       "lr",
      "beta1",     "beta2",          "epsilon",          "weight_decay",
      "clip_norm", "schedule",       "stage1_max_steps", "stage1_eval_interval",
      "stage1_patience", "stage2_patience", "min_improvement"};
  if (!j.is_object()) throw ConfigError("train: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("train: unknown key '" + key + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.optimizer.lr = j.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = j.value("epsilon", c.optimizer.epsilon);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("schedule")) c.schedule = ScheduleConfig::from_json(j.at("schedule"));
    c.stage1_max_steps = j.value("stage1_max_steps", c.stage1_max_steps);
    c.stage1_eval_interval = j.value("stage1_eval_interval", c.stage1_eval_interval);
    c.stage1_patience = j.value("stage1_patience", c.stage1_patience);
    c.stage2_patience = j.value("stage2_patience", c.stage2_patience);
    c.min_improvement = j.value("min_improvement", c.min_improvement);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t stage2_eval_interval(const ScheduleConfig& schedule) {
  return std::max<std::uint64_t>(1, schedule.total_steps / 50);
}

double early_stop_start(Variant variant, const ScheduleConfig& schedule) {
  return variant == Variant::Sft || variant == Variant::DssStyle ? 0.0 : schedule.sampling_end();
}

std::size_t TrainReport::predicted_branch_total() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.predicted;
  return n;
}

nlohmann::ordered_json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = to_string(variant);

  nlohmann::ordered_json s1;
  s1["steps_run"] = stage1_steps.size();
  s1["best_step"] = stage1_best_step ? nlohmann::ordered_json(*stage1_best_step) : nlohmann::ordered_json();
  s1["stopped_early"] = stage1_stopped_early;
  auto v1 = nlohmann::ordered_json::array();
  for (const auto& v : stage1_validation) v1.push_back({{"step", v.step}, {"val_loss", v.score}});
  s1["validation"] = v1;
  auto l1 = nlohmann::ordered_json::array();
  for (const auto& s : stage1_steps) l1.push_back({{"step", s.step}, {"l_stage1", s.loss}});
  s1["losses"] = l1;
  j["stage1"] = s1;

  nlohmann::ordered_json s2;
  s2["steps_run"] = stage2_steps_run;
  s2["selected_checkpoint"] = selected_checkpoint;
  s2["selected_step"] = selected_step;
  s2["selected_macro_f1"] = selected_score;
  s2["stopped_early"] = stopped_early;
  s2["predicted_branch_total"] = predicted_branch_total();
  auto v2 = nlohmann::ordered_json::array();
  for (const auto& v : validation) v2.push_back({{"step", v.step}, {"macro_f1", v.score}});
  s2["validation"] = v2;
  auto l2 = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json row;
    row["t"] = s.t;
    row["pi"] = s.pi;
    row["alpha"] = s.alpha;
    row["l_pred"] = s.l_pred;
    row["l_expl"] = optional_number(s.l_expl);
    row["l_total"] = s.l_total;
    row["predicted"] = s.predicted;
    row["gold"] = s.gold;
    l2.push_back(row);
  }
  s2["steps"] = l2;
  j["stage2"] = s2;
  return j;
}

double rationale_loss(const TaskModel& model, const TaskData& data) {
  double total = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(data.size(), begin + kEvalChunk);
    std::vector<TokenSeq> prompts, targets;
    for (std::size_t i = begin; i < end; ++i) {
      prompts.push_back(data.encoded[i].explain_prompt);
      targets.push_back(data.encoded[i].rationale);
    }
    Tape tape(Tape::Mode::Inference);
    const double mean = seq2seq::sequence_nll(tape, model.params, prompts, targets).value().item();
    total += mean * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(data.size());
}

double validation_macro_f1(const TaskModel& model, const TaskData& data) {
  std::vector<std::string> inputs, golds;
  inputs.reserve(data.size());
  for (const auto& ex : data.examples) {
    inputs.push_back(ex.input_text);
    golds.push_back(ex.gold_label);
  }
  return eval::macro_f1(predict_labels(model, inputs), golds, model.labels).macro_f1;
}

Checkpoint train_stage1(TaskModel& model, const TaskData& train, const TaskData& val, const TrainConfig& cfg,
                        TrainReport& report) {
  require_data(train, val, "stage 1");
  BatchSampler sampler(train.size(), cfg.batch_size, stream(cfg.seed, kStage1Data));
  auto opt = tensor::make_optimizer_state(model.params.tensors, cfg.optimizer);
  const Rng stage_rng = stream(cfg.seed, kStage1Data);

  std::optional<Checkpoint> best;
  std::size_t non_improving = 0;
  for (std::uint64_t step = 0; step < cfg.stage1_max_steps; ++step) {
    const auto batch = sampler.next();
    std::vector<TokenSeq> prompts, targets;
    for (auto i : batch) {
      prompts.push_back(train.encoded[i].explain_prompt);
      targets.push_back(train.encoded[i].rationale);
    }
    const double loss = at_step(step, "stage 1", [&] {
      Tape tape;
      Var l = seq2seq::sequence_nll(tape, model.params, prompts, targets);
      auto grads = tape.backward(l);
      apply_update(model, grads, opt, cfg);
      return l.value().item();
    });
    report.stage1_steps.push_back({step, loss});

    const std::uint64_t done = step + 1;
    if (done % cfg.stage1_eval_interval != 0 && done != cfg.stage1_max_steps) continue;
    const double val_loss = at_step(step, "stage 1", [&] { return rationale_loss(model, val); });
    report.stage1_validation.push_back({done, val_loss});
    spdlog::info("stage 1 step {}: train loss {:.4f}, val loss {:.4f}", done, loss, val_loss);
    if (!best || val_loss < best->validation_score - cfg.min_improvement) {
      best = snapshot(model, done, val_loss, "val_loss", stage_rng);
      non_improving = 0;
    } else if (++non_improving >= cfg.stage1_patience) {
      report.stage1_stopped_early = true;
      break;
    }
  }
  if (!best) best = snapshot(model, 0, rationale_loss(model, val), "val_loss", stage_rng);
  report.stage1_best_step = best->step;
  model.params = best->model.params;
  return *best;
}

tensor::Gradients stage2_gradients(const TaskModel& model, const TaskData& data, std::span<const std::size_t> batch,
                                   std::span<const ConditioningChoice> choices, double alpha, StepLosses& losses) {
  std::vector<TokenSeq> pred_prompts, labels;
  for (auto i : batch) {
    pred_prompts.push_back(data.encoded[i].predict_prompt);
    labels.push_back(data.encoded[i].label);
  }
  Tape tape;
  Var l_pred = seq2seq::sequence_nll(tape, model.params, pred_prompts, labels);
  losses.l_pred = l_pred.value().item();
  if (!uses_rationales(model.variant)) {
    losses.l_expl.reset();
    losses.l_total = losses.l_pred;
    return tape.backward(l_pred);
  }

  std::vector<TokenSeq> expl_prompts, rationales;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::size_t i = batch[k];
    if (label_conditioned(model.variant)) {
      expl_prompts.push_back(model.vocab.encode(
          rationale_prompt(model, choices[k].label, data.examples[i].input_text)));
    } else {
      expl_prompts.push_back(data.encoded[i].explain_prompt);
    }
    rationales.push_back(data.encoded[i].rationale);
  }
  Var l_expl = seq2seq::sequence_nll(tape, model.params, expl_prompts, rationales);
  Var total = tensor::add(tensor::scale(l_pred, alpha), tensor::scale(l_expl, 1.0 - alpha));
  losses.l_expl = l_expl.value().item();
  losses.l_total = total.value().item();
  return tape.backward(total);
}

Checkpoint train_stage2(TaskModel& model, const TaskData& train, const TaskData& val, const TrainConfig& cfg,
                        TrainReport& report, const Stage2Hooks& hooks) {
  require_data(train, val, "stage 2");
  const ScheduleConfig& sched = cfg.schedule;
  const Variant variant = model.variant;
  BatchSampler sampler(train.size(), cfg.batch_size, stream(cfg.seed, kStage2Data));
  Rng sampling = stream(cfg.seed, kSampling);
  auto opt = tensor::make_optimizer_state(model.params.tensors, cfg.optimizer);
  const LabelPredictor predictor = hooks.predictor ? hooks.predictor : greedy_label_predictor(model);
  const std::uint64_t interval = stage2_eval_interval(sched);
  const double arm_at = early_stop_start(variant, sched);

  std::optional<Checkpoint> best;
  std::size_t non_improving = 0;
  report.variant = variant;
  for (std::uint64_t t = 0; t < sched.total_steps; ++t) {
    StepRecord rec;
    rec.t = t;
    switch (variant) {
      case Variant::Sft: rec.alpha = 1.0; break;
      case Variant::DssStyle: rec.alpha = 0.5; break;
      case Variant::NoScheduledSampling: rec.alpha = alpha_at(t, sched); break;
      case Variant::NoWarmup: rec.alpha = sched.alpha_max; rec.pi = pi_at(t, sched); break;
      default: rec.alpha = alpha_at(t, sched); rec.pi = pi_at(t, sched); break;
    }
    const auto batch = sampler.next();

    at_step(t, "stage 2", [&] {
      std::vector<ConditioningChoice> choices;
      if (label_conditioned(variant)) {
        std::vector<const data::Example*> examples;
        for (auto i : batch) examples.push_back(&train.examples[i]);
        choices = choose_conditioning_labels(examples, rec.pi, sampling, predictor);
        for (const auto& c : choices) (c.source == LabelSource::Predicted ? rec.predicted : rec.gold)++;
      }
      StepLosses losses;
      auto grads = stage2_gradients(model, train, batch, choices, rec.alpha, losses);
      apply_update(model, grads, opt, cfg);
      rec.l_pred = losses.l_pred;
      rec.l_expl = losses.l_expl;
      rec.l_total = losses.l_total;
      return 0;
    });
    report.steps.push_back(rec);
    report.stage2_steps_run = t + 1;
    if (hooks.on_step) hooks.on_step(rec);

    const std::uint64_t done = t + 1;
    if (done % interval != 0 && done != sched.total_steps) continue;
    const ValidationRecord v{done, at_step(t, "stage 2", [&] { return validation_macro_f1(model, val); })};
    report.validation.push_back(v);
    if (hooks.on_validation) hooks.on_validation(v);
    spdlog::info("stage 2 step {} ({}): pi {:.3f} alpha {:.3f} loss {:.4f}, val macro-F1 {:.4f}", done,
                 to_string(variant), rec.pi, rec.alpha, rec.l_total, v.score);
    if (!best || v.score > best->validation_score + cfg.min_improvement) {
      best = snapshot(model, done, v.score, "macro_f1", sampling);
      non_improving = 0;
    } else if (static_cast<double>(done) >= arm_at && ++non_improving >= cfg.stage2_patience) {
      report.stopped_early = true;
      break;
    }
  }
  report.selected_step = best->step;
  report.selected_score = best->validation_score;
  report.selected_checkpoint = "stage2-step-" + std::to_string(best->step);
  model.params = best->model.params;
  return *best;
}

TrainResult run_training(const TrainSetup& setup, const Stage2Hooks& hooks) {
  const TrainConfig& cfg = setup.train_config;
  cfg.validate();
  if (setup.train.empty()) throw ContractError("training set is empty");
  if (setup.val.empty()) throw ContractError("validation set is empty");

  TaskModel model;
  model.variant = cfg.variant;
  model.vocab = build_task_vocab(setup.train);
  model.labels = setup.labels.empty() ? collect_labels(setup.train) : setup.labels;
  for (const auto& ex : setup.val) {
    if (std::find(model.labels.begin(), model.labels.end(), ex.gold_label) == model.labels.end()) {
      model.labels.push_back(ex.gold_label);
    }
  }
  model.markers = setup.markers;
  std::size_t longest_label = 0, longest_rationale = 0;
  for (const auto& ex : setup.train) {
    longest_label = std::max(longest_label, model.vocab.encode(ex.gold_label).size());
    longest_rationale = std::max(longest_rationale, model.vocab.encode(ex.gold_rationale).size());
  }
  model.max_label_tokens = longest_label + 2;
  model.max_rationale_tokens = longest_rationale + 8;

  seq2seq::ModelConfig mc = setup.model;
  mc.vocab_size = model.vocab.size();
  mc.validate();
  Rng init = stream(cfg.seed, kInit);
  model.params = seq2seq::init_model(mc, init);

  const TaskData train = prepare_task_data(setup.train, model.vocab, mc.max_len, model.max_label_tokens);
  const TaskData val = prepare_task_data(setup.val, model.vocab, mc.max_len, model.max_label_tokens);

  TrainResult result;
  result.report.variant = cfg.variant;
  if (runs_stage1(cfg.variant)) train_stage1(model, train, val, cfg, result.report);
  result.checkpoint = train_stage2(model, train, val, cfg, result.report, hooks);
  result.checkpoint.config = setup.run_config;
  return result;
}

}  // namespace r2d::curriculum
