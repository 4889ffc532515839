#include "r2d/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "r2d/curriculum/checkpoint.hpp"
#include "r2d/curriculum/inference.hpp"
#include "r2d/data/jsonl.hpp"
#include "r2d/errors.hpp"

namespace r2d::cli {

namespace fs = std::filesystem;
using curriculum::Variant;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void echo_config(const RunConfig& cfg, const fs::path& out) {
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json histogram(std::span<const data::Example> examples) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[e.gold_label];
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [label, n] : counts) j[label] = n;
  return j;
}

std::optional<double> cell_metric(const CellResult& c, const std::string& name) {
  if (!c.ok) return std::nullopt;
  if (name == "macro_f1") return c.metrics.macro_f1;
  if (name == "accuracy") return c.metrics.accuracy;
  if (name == "bleu") return c.metrics.bleu;
  return c.metrics.consistency;
}

const std::vector<std::string> kTableMetrics{"macro_f1", "accuracy", "bleu", "consistency"};

}  // namespace

data::GrammarConfig load_grammar(const DataConfig& data) {
  return data.grammar.empty() ? data::GrammarConfig::defaults() : data::GrammarConfig::load(data.grammar);
}

Corpus load_corpus(const RunConfig& cfg) {
  const DataConfig& d = cfg.data;
  Corpus c;
  std::optional<data::GrammarConfig> grammar;
  if (!d.train_jsonl.empty() || !d.dir.empty()) {
    fs::path train = d.train_jsonl, val = d.val_jsonl, test = d.test_jsonl;
    if (d.train_jsonl.empty()) {
      train = fs::path(d.dir) / "train.jsonl";
      val = fs::path(d.dir) / "val.jsonl";
      test = fs::path(d.dir) / "test.jsonl";
      if (d.grammar.empty() && fs::exists(fs::path(d.dir) / "grammar.json")) {
        grammar = data::GrammarConfig::load(fs::path(d.dir) / "grammar.json");
      }
    }
    if (val.empty()) throw ConfigError("data.val_jsonl is required with data.train_jsonl");
    c.train = data::load_jsonl(train);
    c.val = data::load_jsonl(val);
    if (!test.empty() && fs::exists(test)) c.test = data::load_jsonl(test);
    if (!d.grammar.empty()) grammar = load_grammar(d);
  } else {
    grammar = load_grammar(d);
    const auto all = data::generate_synthetic(*grammar, d.synthetic_examples);
    auto split = data::stratified_split(all, d.fractions, grammar->seed);
    c.train = std::move(split.train);
    c.val = std::move(split.val);
    c.test = std::move(split.test);
  }
  if (grammar) {
    c.labels = grammar->label_names();
    c.markers = grammar->markers();
  }
  return c;
}

Evaluation evaluate_model(const curriculum::TaskModel& model, std::span<const data::Example> examples) {
  if (examples.empty()) throw ContractError("evaluation data is empty");
  std::vector<std::string> inputs, golds, refs;
  for (const auto& e : examples) {
    inputs.push_back(e.input_text);
    golds.push_back(e.gold_label);
    refs.push_back(e.gold_rationale);
  }
  Evaluation ev;
  for (auto& r : curriculum::infer_batch(model, inputs)) {
    ev.predictions.labels.push_back(std::move(r.label));
    ev.predictions.rationales.push_back(std::move(r.rationale));
  }
  // Gold labels missing from the model's label list still count as classes.
  std::vector<std::string> labels = model.labels;
  for (const auto& g : golds) {
    if (std::find(labels.begin(), labels.end(), g) == labels.end()) labels.push_back(g);
  }
  // Consistency is undefined for a model that never writes rationales.
  const bool consistency = !model.markers.empty() && curriculum::uses_rationales(model.variant);
  ev.report = eval::build_report(ev.predictions, golds, refs, labels, consistency ? &model.markers : nullptr);
  return ev;
}

CellResult train_and_evaluate(const RunConfig& cfg, const Corpus& corpus, Variant variant, std::uint64_t seed,
                              const curriculum::Stage2Hooks& hooks) {
  CellResult cell;
  cell.variant = variant;
  cell.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig run = cfg;
    run.seed = seed;
    run.variant = variant;
    run.train.seed = seed;
    run.train.variant = variant;
    curriculum::TrainSetup setup;
    setup.train = corpus.train;
    setup.val = corpus.val;
    setup.model = run.model;
    setup.train_config = run.train_config();
    setup.labels = corpus.labels;
    setup.markers = corpus.markers;
    setup.run_config = nlohmann::json::parse(run.to_json().dump());
    cell.training = curriculum::run_training(setup, hooks);
    const auto& eval_set = corpus.test.empty() ? corpus.val : corpus.test;
    cell.metrics = evaluate_model(cell.training.checkpoint.model, eval_set).report;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
    spdlog::error("{} seed {} failed: {}", curriculum::to_string(variant), seed, e.what());
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

nlohmann::ordered_json ablation_json(const std::vector<CellResult>& cells, const std::vector<Variant>& variants) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json row;
    row["variant"] = curriculum::to_string(c.variant);
    row["seed"] = c.seed;
    row["status"] = c.ok ? "ok" : "failed";
    for (const auto& m : kTableMetrics) {
      const auto v = cell_metric(c, m);
      row[m] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
    }
    if (c.ok) {
      row["selected_step"] = c.training.report.selected_step;
      row["stage2_steps_run"] = c.training.report.stage2_steps_run;
    } else {
      row["error"] = c.error;
    }
    rows.push_back(row);
  }
  j["cells"] = rows;
  nlohmann::ordered_json medians = nlohmann::ordered_json::object();
  for (Variant v : variants) {
    nlohmann::ordered_json mrow;
    for (const auto& m : kTableMetrics) {
      std::vector<double> values;
      for (const auto& c : cells) {
        if (c.variant != v) continue;
        if (auto x = cell_metric(c, m)) values.push_back(*x);
      }
      mrow[m] = values.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(median(values));
    }
    medians[curriculum::to_string(v)] = mrow;
  }
  j["medians"] = medians;
  return j;
}

std::string ablation_text(const std::vector<CellResult>& cells, const std::vector<Variant>& variants) {
  const auto j = ablation_json(cells, variants);
  std::ostringstream out;
  auto num = [](const nlohmann::ordered_json& v) {
    if (v.is_null()) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v.get<double>();
    return s.str();
  };
  out << std::left << std::setw(24) << "variant" << std::setw(8) << "seed";
  for (const auto& m : kTableMetrics) out << std::setw(13) << m;
  out << "status\n";
  for (const auto& row : j["cells"]) {
    out << std::setw(24) << row["variant"].get<std::string>() << std::setw(8) << row["seed"].get<std::uint64_t>();
    for (const auto& m : kTableMetrics) out << std::setw(13) << num(row[m]);
    out << row["status"].get<std::string>() << "\n";
  }
  out << "\n" << std::setw(24) << "median" << std::setw(8) << "";
  for (const auto& m : kTableMetrics) out << std::setw(13) << m;
  out << "\n";
  for (const auto& [name, mrow] : j["medians"].items()) {
    out << std::setw(24) << name << std::setw(8) << "";
    for (const auto& m : kTableMetrics) out << std::setw(13) << num(mrow[m]);
    out << "\n";
  }
  return out.str();
}

int cmd_gen_data(const RunConfig& cfg, const fs::path& out) {
  const auto grammar = load_grammar(cfg.data);
  const auto all = data::generate_synthetic(grammar, cfg.data.synthetic_examples);
  const auto split = data::stratified_split(all, cfg.data.fractions, grammar.seed);
  make_dir(out);
  data::write_jsonl(out / "train.jsonl", split.train);
  data::write_jsonl(out / "val.jsonl", split.val);
  data::write_jsonl(out / "test.jsonl", split.test);
  write_text(out / "grammar.json", grammar.to_json().dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["seed"] = grammar.seed;
  manifest["examples"] = all.size();
  manifest["fractions"] = {{"train", cfg.data.fractions.train},
                           {"val", cfg.data.fractions.val},
                           {"test", cfg.data.fractions.test}};
  manifest["counts"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
  manifest["label_histogram"] = {{"train", histogram(split.train)},
                                 {"val", histogram(split.val)},
                                 {"test", histogram(split.test)}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  echo_config(cfg, out);
  spdlog::info("wrote {} / {} / {} examples to {}", split.train.size(), split.val.size(), split.test.size(),
               out.string());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& out) {
  const Corpus corpus = load_corpus(cfg);
  curriculum::TrainSetup setup;
  setup.train = corpus.train;
  setup.val = corpus.val;
  setup.model = cfg.model;
  setup.train_config = cfg.train_config();
  setup.labels = corpus.labels;
  setup.markers = corpus.markers;
  setup.run_config = nlohmann::json::parse(cfg.to_json().dump());
  const auto result = curriculum::run_training(setup);
  make_dir(out);
  curriculum::save_checkpoint(out / "checkpoint.r2d", result.checkpoint);
  write_text(out / "train_report.json", result.report.to_json().dump(2) + "\n");
  echo_config(cfg, out);
  spdlog::info("selected {} (validation macro-F1 {:.4f})", result.report.selected_checkpoint,
               result.report.selected_score);
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data_path, const fs::path& out,
                 std::ostream& stdout_stream) {
  const auto ckpt = curriculum::load_checkpoint(checkpoint);
  const auto examples = data::load_jsonl(data_path);
  const auto ev = evaluate_model(ckpt.model, examples);
  const std::string json = ev.report.dump();
  if (!out.empty()) {
    make_dir(out);
    write_text(out / "metrics.json", json);
    std::vector<data::Example> predicted;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      predicted.push_back({examples[i].id, examples[i].input_text, ev.predictions.labels[i],
                           ev.predictions.rationales[i]});
    }
    data::write_jsonl(out / "predictions.jsonl", predicted);
  }
  stdout_stream << json;
  return kExitOk;
}

int cmd_infer(const fs::path& checkpoint, const std::string& input, std::ostream& stdout_stream,
              std::ostream& stderr_stream) {
  if (input.find_first_not_of(" \t\r\n") == std::string::npos) {
    stderr_stream << "infer: --input must be a non-empty text\n";
    return kExitUsage;
  }
  const auto ckpt = curriculum::load_checkpoint(checkpoint);
  const auto result = curriculum::infer(ckpt.model, input);
  stdout_stream << result.label << "\n" << result.rationale << "\n";
  return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, const fs::path& out, std::ostream& stdout_stream) {
  const Corpus corpus = load_corpus(cfg);
  make_dir(out);
  echo_config(cfg, out);
  std::vector<CellResult> cells;
  for (Variant v : cfg.ablation.variants) {
    for (std::uint64_t seed : cfg.ablation.seeds) {
      auto cell = train_and_evaluate(cfg, corpus, v, seed);
      spdlog::info("{} seed {}: {} in {:.1f}s", curriculum::to_string(v), seed, cell.ok ? "ok" : "failed",
                   cell.seconds);
      if (cell.ok) {
        const fs::path dir = out / "cells" / (curriculum::to_string(v) + "-seed" + std::to_string(seed));
        make_dir(dir);
        curriculum::save_checkpoint(dir / "checkpoint.r2d", cell.training.checkpoint);
        write_text(dir / "train_report.json", cell.training.report.to_json().dump(2) + "\n");
        write_text(dir / "metrics.json", cell.metrics.dump());
        cell.training.checkpoint = {};  // drop the model once persisted
      }
      cells.push_back(std::move(cell));
    }
  }
  const std::string text = ablation_text(cells, cfg.ablation.variants);
  write_text(out / "ablation.json", ablation_json(cells, cfg.ablation.variants).dump(2) + "\n");
  write_text(out / "ablation.txt", text);
  stdout_stream << text;
  const bool all_ok = std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
  return all_ok ? kExitOk : kExitFailure;
}

int cmd_schedule_dump(const RunConfig& cfg, std::ostream& out) {
  const auto& sched = cfg.train.schedule;
  out << "t,pi,alpha\n";
  for (std::uint64_t t = 0; t <= sched.total_steps; ++t) {
    out << t << ',' << shortest(curriculum::pi_at(t, sched)) << ',' << shortest(curriculum::alpha_at(t, sched))
        << '\n';
  }
  return kExitOk;
}

}  // namespace r2d::cli
