#include <cstdlib>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "r2d/cli/commands.hpp"
#include "r2d/errors.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("r2d");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("R2D_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (level != "info") spdlog::warn("R2D_LOG={} not recognised; using info", level);
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Two-stage rationale/label training with task-level scheduled sampling"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Run config JSON (defaults when omitted)");
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--out", out_dir, "Output directory (overrides out_dir)");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic corpus split into train/val/test JSONL");
  auto* train = app.add_subcommand(
      "train",
      "Train the configured variant. no-warmup keeps the pi schedule (including its warm-up) and fixes "
      "alpha at alpha_max from step 0");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a JSONL file");
  std::string checkpoint, data_path, input;
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--data", data_path, "JSONL examples")->required();
  auto* infer = app.add_subcommand("infer", "Predict a label and rationale for one input");
  infer->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer->add_option("--input", input, "Input text")->required();
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant x seed");
  auto* dump = app.add_subcommand("schedule-dump", "CSV of t, pi_t, alpha_t for t = 0..T");
  for (auto* sub : {gen, train, evaluate, infer, ablate, dump}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : r2d::cli::kExitUsage;
  }

  try {
    using namespace r2d::cli;
    if (*infer) return cmd_infer(checkpoint, input, std::cout, std::cerr);
    if (*evaluate) return cmd_evaluate(checkpoint, data_path, out_dir, std::cout);

    nlohmann::json raw = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw r2d::IoError("cannot read config " + config_path);
      try {
        raw = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw r2d::ConfigError(config_path + ": " + e.what());
      }
    }
    if (seed) raw["seed"] = *seed;
    if (!out_dir.empty()) raw["out_dir"] = out_dir;
    const RunConfig cfg = RunConfig::from_json(raw);

    if (*gen) return cmd_gen_data(cfg, cfg.out_dir);
    if (*train) return cmd_train(cfg, cfg.out_dir);
    if (*ablate) return cmd_ablate(cfg, cfg.out_dir, std::cout);
    if (*dump) {
      if (out_dir.empty()) return cmd_schedule_dump(cfg, std::cout);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream out(std::filesystem::path(cfg.out_dir) / "schedule.csv", std::ios::binary);
      return cmd_schedule_dump(cfg, out);
    }
  } catch (const r2d::ConfigError& e) {
    spdlog::error("{}", e.what());
    return r2d::cli::kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return r2d::cli::kExitFailure;
  }
  return r2d::cli::kExitUsage;
}
