#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "r2d/cli/run_config.hpp"
#include "r2d/curriculum/trainer.hpp"
#include "r2d/data/grammar.hpp"
#include "r2d/eval/report.hpp"

namespace r2d::cli {

/// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Writes train/val/test.jsonl, manifest.json and config.json under `out`.
int cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out);

/// Trains the configured variant; writes checkpoint.r2d, train_report.json
/// and config.json under `out`.
int cmd_train(const RunConfig& cfg, const std::filesystem::path& out);

/// Runs inference over a JSONL file and prints the MetricsReport; with a
/// non-empty `out`, also writes metrics.json and predictions.jsonl there.
int cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                 const std::filesystem::path& out, std::ostream& stdout_stream);

/// Prints the predicted label on line 1 and the rationale on line 2.
int cmd_infer(const std::filesystem::path& checkpoint, const std::string& input, std::ostream& stdout_stream,
              std::ostream& stderr_stream);

/// Trains and evaluates every variant × seed cell; writes ablation.json and
/// ablation.txt under `out`. Failed cells are marked and make the exit code 1.
int cmd_ablate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& stdout_stream);

/// CSV "t,pi,alpha" for t = 0..T, shortest round-trip number formatting.
int cmd_schedule_dump(const RunConfig& cfg, std::ostream& out);

/// Grammar selected by the data config.
data::GrammarConfig load_grammar(const DataConfig& data);

/// Train/val/test examples plus the label order and markers that go with them.
struct Corpus {
  std::vector<data::Example> train;
  std::vector<data::Example> val;
  std::vector<data::Example> test;
  std::vector<std::string> labels;
  std::map<std::string, std::string> markers;
};

/// Explicit JSONL files first, then `data.dir`, else a synthetic corpus.
/// Synthetic data depends only on the grammar (including its seed) and the
/// split fractions, never on the run seed.
Corpus load_corpus(const RunConfig& cfg);

/// Labels, rationales and metrics of a model over a data set.
struct Evaluation {
  eval::Predictions predictions;
  eval::MetricsReport report;
};
Evaluation evaluate_model(const curriculum::TaskModel& model, std::span<const data::Example> examples);

struct CellResult {
  curriculum::Variant variant = curriculum::Variant::Full;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  curriculum::TrainResult training;
  eval::MetricsReport metrics;  // on the test split (validation if test is empty)
  double seconds = 0.0;        // wall time, logged only
};

/// Trains one variant/seed on the corpus and evaluates it.
CellResult train_and_evaluate(const RunConfig& cfg, const Corpus& corpus, curriculum::Variant variant,
                              std::uint64_t seed, const curriculum::Stage2Hooks& hooks = {});

/// Median (mean of the middle pair for even counts); throws ContractError when empty.
double median(std::vector<double> values);

/// Ablation table as JSON: per-cell metrics and per-variant medians.
nlohmann::ordered_json ablation_json(const std::vector<CellResult>& cells, const std::vector<curriculum::Variant>& variants);
/// The same table as aligned text.
std::string ablation_text(const std::vector<CellResult>& cells, const std::vector<curriculum::Variant>& variants);

}  // namespace r2d::cli
