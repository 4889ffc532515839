// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion names as arguments to run a
// subset: schedule gradients metrics learnability ablation consistency
// determinism protocol. Results also go to acceptance_results.json in the
// working directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "r2d/cli/commands.hpp"
#include "r2d/curriculum/checkpoint.hpp"
#include "r2d/curriculum/schedule.hpp"
#include "r2d/curriculum/task.hpp"
#include "r2d/curriculum/trainer.hpp"
#include "r2d/eval/metrics.hpp"
#include "r2d/seq2seq/model.hpp"
#include "r2d/tensor/rng.hpp"
#include "support/finite_difference.hpp"
#include "support/metric_oracles.hpp"

using namespace r2d;
namespace fs = std::filesystem;
using curriculum::Variant;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- schedule

// Exact-rational form of the schedules for warmup 1/20, transition 3/5,
// ceiling 9/10 and alpha_max 7/10, all in integer arithmetic.
double oracle_pi(std::int64_t t, std::int64_t T) {
  if (20 * t < T) return 0.0;
  if (20 * t < 13 * T) {
    // (t - T/20) / (3T/5) = (20t - T) / (12T); capped at 9/10
    const std::int64_t num = 20 * t - T, den = 12 * T;
    if (10 * num >= 9 * den) return 0.9;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  return 0.9;
}

double oracle_alpha(std::int64_t t, std::int64_t T) {
  if (20 * t < T) return static_cast<double>(14 * t) / static_cast<double>(T);  // (t / (T/20)) * 7/10
  return 0.7;
}

Outcome check_schedule() {
  Outcome o;
  double worst = 0.0;
  std::size_t checked = 0;
  bool boundaries_ok = true;
  for (std::int64_t T : {100, 1000, 5000}) {
    curriculum::ScheduleConfig cfg;
    cfg.total_steps = static_cast<std::uint64_t>(T);
    for (std::int64_t t = 0; t <= T; ++t) {
      const auto u = static_cast<std::uint64_t>(t);
      worst = std::max({worst, std::abs(curriculum::pi_at(u, cfg) - oracle_pi(t, T)),
                        std::abs(curriculum::alpha_at(u, cfg) - oracle_alpha(t, T))});
      ++checked;
    }
    const std::int64_t w = T / 20, m = 3 * T / 5;
    const std::int64_t near_end = w + 9 * m / 10;
    const std::vector<std::pair<std::int64_t, double>> pi_points{
        {0, 0.0}, {w - 1, 0.0}, {w, 0.0}, {near_end, 0.9}, {w + m, 0.9}, {T, 0.9}};
    for (const auto& [t, expected] : pi_points) {
      boundaries_ok &= std::abs(curriculum::pi_at(static_cast<std::uint64_t>(t), cfg) - expected) <= 1e-12;
    }
    boundaries_ok &= std::abs(curriculum::alpha_at(static_cast<std::uint64_t>(w - 1), cfg) -
                              0.7 * static_cast<double>(w - 1) / static_cast<double>(w)) <= 1e-12;
    boundaries_ok &= curriculum::alpha_at(static_cast<std::uint64_t>(w), cfg) == 0.7;
  }
  o.pass = worst <= 1e-12 && boundaries_ok;
  o.detail = std::to_string(checked) + " steps, max abs error " + num(worst) +
             (boundaries_ok ? "" : ", boundary values wrong");
  return o;
}

// ---------------------------------------------------------------- gradients

Outcome check_gradients() {
  std::vector<data::Example> examples{
      {"g0", "short cough and mild fever", "home care", "mild fever points to home care"},
      {"g1", "sudden chest pain with sweating", "go to ed now", "chest pain points to the ed"},
      {"g2", "rash on the arm for a week", "see physician", "a lasting rash needs a physician"},
  };
  // Pad the first input with filler words until the vocabulary has 50 entries.
  for (int k = 0; curriculum::build_task_vocab(examples).size() < 50; ++k) {
    examples[0].input_text += " filler" + std::to_string(k);
  }
  const auto vocab = curriculum::build_task_vocab(examples);
  if (vocab.size() != 50) return {false, "vocabulary size " + std::to_string(vocab.size())};

  const seq2seq::ModelConfig cfg{.encoder_layers = 2, .decoder_layers = 2, .d_model = 16, .heads = 4,
                                 .d_ff = 64, .max_len = 64, .vocab_size = 50};
  tensor::Rng rng(11);
  curriculum::TaskModel model;
  model.params = seq2seq::init_model(cfg, rng);
  // Zero biases and unit gains would hide some gradient terms.
  for (auto& e : model.params.tensors.entries()) {
    if (e.name.find(".b") != std::string::npos || e.name.ends_with(".g")) {
      for (double& v : e.value.data()) v += 0.1 * (rng.uniform() - 0.5);
    }
  }
  model.vocab = vocab;
  model.labels = curriculum::collect_labels(examples);
  const auto task = curriculum::prepare_task_data(examples, vocab, cfg.max_len, 4);

  const std::vector<std::size_t> batch{0, 1, 2};
  // Example 1 is explained under a wrong (predicted-style) label.
  const std::vector<curriculum::ConditioningChoice> choices{
      {"home care", curriculum::LabelSource::Gold},
      {"see physician", curriculum::LabelSource::Predicted},
      {"see physician", curriculum::LabelSource::Gold}};

  std::vector<seq2seq::TokenSeq> pred_prompts, labels, expl_prompts, rationales;
  for (std::size_t i : batch) {
    pred_prompts.push_back(task.encoded[i].predict_prompt);
    labels.push_back(task.encoded[i].label);
    expl_prompts.push_back(vocab.encode(curriculum::rationale_prompt(model, choices[i].label, examples[i].input_text)));
    rationales.push_back(task.encoded[i].rationale);
  }

  struct Case {
    const char* name;
    double alpha;
    const std::vector<seq2seq::TokenSeq>* prompts;
    const std::vector<seq2seq::TokenSeq>* targets;
  };
  const Case cases[] = {{"L_pred", 1.0, &pred_prompts, &labels}, {"L_expl", 0.0, &expl_prompts, &rationales}};

  Outcome o{true, ""};
  for (const auto& c : cases) {
    curriculum::StepLosses losses;
    const auto analytic = curriculum::stage2_gradients(model, task, batch, choices, c.alpha, losses);
    auto value = [&](const tensor::ParameterSet& p) {
      const seq2seq::ModelParams copy{cfg, p};
      tensor::Tape tape(tensor::Tape::Mode::Inference);
      return seq2seq::sequence_nll(tape, copy, *c.prompts, *c.targets).value().item();
    };
    const double loss_gap = std::abs(losses.l_total - value(model.params.tensors));
    const auto numeric = testing::numeric_gradients(model.params.tensors, value, 1e-5);
    const auto cmp = testing::compare_gradients(analytic, numeric);
    const bool ok = cmp.max_relative_error <= 1e-4 && loss_gap <= 1e-12;
    o.pass &= ok;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.name + " max rel " + num(cmp.max_relative_error) +
                " (" + cmp.worst_tensor + "), loss gap " + num(loss_gap);
  }
  return o;
}

// ---------------------------------------------------------------- metrics

std::string random_sentence(tensor::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  std::string s;
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    if (!s.empty()) s += ' ';
    s += "t" + std::to_string(rng.below(vocab));
  }
  return s;
}

Outcome check_metrics() {
  tensor::Rng rng(2718);
  double bleu_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<std::string> c{random_sentence(rng, 1, 20, 8)};
    const std::vector<std::string> r{random_sentence(rng, 1, 20, 8)};
    bleu_worst = std::max(bleu_worst, std::abs(eval::bleu(c, r) - testing::oracle_bleu(c, r)));
  }
  int f1_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(7));
    const std::size_t n = 1 + rng.below(80);
    std::vector<std::string> names, p, g;
    for (int c = 0; c < k; ++c) names.push_back("label " + std::to_string(c));
    std::vector<int> pi, gi;
    for (std::size_t i = 0; i < n; ++i) {
      const int gold = static_cast<int>(rng.below(k));
      const int pred = static_cast<int>(rng.below(k + 1));  // k: not a label
      gi.push_back(gold);
      pi.push_back(pred);
      g.push_back(names[gold]);
      p.push_back(pred == k ? "noise " + std::to_string(i) : names[pred]);
    }
    if (eval::macro_f1(p, g, names).macro_f1 != testing::oracle_macro_f1(pi, gi, k)) ++f1_mismatch;
  }
  return {bleu_worst <= 1e-9 && f1_mismatch == 0,
          "bleu max abs error " + num(bleu_worst) + ", macro-F1 mismatches " + std::to_string(f1_mismatch) + "/100"};
}

// ---------------------------------------------------------------- training runs

struct Instrumented {
  cli::CellResult cell;
  std::vector<curriculum::StepRecord> steps;
  std::vector<curriculum::ValidationRecord> validation;
  double revalidated = -1.0;  // validation Macro-F1 of the returned model
};

class Harness {
 public:
  Harness() : corpus_(cli::load_corpus(cfg_)) {}

  const cli::RunConfig& config() const { return cfg_; }
  const cli::Corpus& corpus() const { return corpus_; }

  const Instrumented& full_seed0() {
    if (!full0_) {
      Instrumented run;
      curriculum::Stage2Hooks hooks;
      hooks.on_step = [&](const curriculum::StepRecord& r) { run.steps.push_back(r); };
      hooks.on_validation = [&](const curriculum::ValidationRecord& r) { run.validation.push_back(r); };
      run.cell = cli::train_and_evaluate(cfg_, corpus_, Variant::Full, 0, hooks);
      if (run.cell.ok) {
        const auto& m = run.cell.training.checkpoint.model;
        const auto val = curriculum::prepare_task_data(corpus_.val, m.vocab, m.params.config.max_len,
                                                       m.max_label_tokens);
        run.revalidated = curriculum::validation_macro_f1(m, val);
      }
      full0_ = std::move(run);
    }
    return *full0_;
  }

  const cli::CellResult& cell(Variant v, std::uint64_t seed) {
    if (v == Variant::Full && seed == 0) return full_seed0().cell;
    const auto key = std::make_pair(v, seed);
    auto it = cells_.find(key);
    if (it == cells_.end()) {
      auto c = cli::train_and_evaluate(cfg_, corpus_, v, seed);
      spdlog::info("{} seed {}: macro-F1 {:.4f}, consistency {}, {:.0f}s", curriculum::to_string(v), seed,
                   c.metrics.macro_f1, c.metrics.consistency ? num(*c.metrics.consistency) : "n/a", c.seconds);
      c.training.checkpoint = {};
      it = cells_.emplace(key, std::move(c)).first;
    }
    return it->second;
  }

 private:
  cli::RunConfig cfg_;
  cli::Corpus corpus_;
  std::optional<Instrumented> full0_;
  std::map<std::pair<Variant, std::uint64_t>, cli::CellResult> cells_;
};

Outcome check_learnability(Harness& h) {
  const auto& c = h.corpus();
  const auto& run = h.full_seed0();
  if (!run.cell.ok) return {false, "training failed: " + run.cell.error};
  const auto& rep = run.cell.training.report;
  const bool sizes = c.train.size() == 2000 && c.val.size() == 500 && c.test.size() == 500;
  const bool labels = c.labels.size() == 6;
  const bool steps = rep.stage2_steps_run <= 5000;
  const double f1 = run.cell.metrics.macro_f1;
  Outcome o;
  o.seconds = run.cell.seconds;
  o.pass = sizes && labels && steps && f1 >= 0.90 && run.cell.seconds <= 15 * 60;
  o.detail = "test macro-F1 " + num(f1) + ", split " + std::to_string(c.train.size()) + "/" +
             std::to_string(c.val.size()) + "/" + std::to_string(c.test.size()) + ", " +
             std::to_string(c.labels.size()) + " labels, stage-2 steps " + std::to_string(rep.stage2_steps_run) +
             " (selected " + std::to_string(rep.selected_step) + "), " + num(run.cell.seconds, 3) + " s";
  return o;
}

Outcome check_protocol(Harness& h) {
  const auto& run = h.full_seed0();
  if (!run.cell.ok) return {false, "training failed: " + run.cell.error};
  const auto& rep = run.cell.training.report;
  const auto& sched = h.config().train.schedule;
  const auto T = static_cast<std::int64_t>(sched.total_steps);
  const std::int64_t w_plus_m = T / 20 + 3 * T / 5;

  // (a) training ran through the sampling phase whether or not it stopped early
  const bool a = static_cast<std::int64_t>(rep.stage2_steps_run) >= w_plus_m &&
                 run.steps.size() == rep.stage2_steps_run && (rep.stopped_early || rep.stage2_steps_run == sched.total_steps);

  // (b) the returned model is the best validation evaluation, and re-scoring it agrees
  double best = -1.0;
  std::uint64_t best_step = 0;
  for (const auto& v : run.validation) {
    if (v.score > best) {
      best = v.score;
      best_step = v.step;
    }
  }
  const bool b = !run.validation.empty() && rep.selected_score == best && rep.selected_step == best_step &&
                 std::abs(run.revalidated - best) <= 1e-12;

  // (c) the combined loss is the alpha-weighted sum, with alpha from the exact schedule
  double gap = 0.0;
  bool alphas = true;
  for (const auto& s : run.steps) {
    if (!s.l_expl) {
      gap = INFINITY;
      break;
    }
    gap = std::max(gap, std::abs(s.l_total - (s.alpha * s.l_pred + (1.0 - s.alpha) * *s.l_expl)));
    alphas &= std::abs(s.alpha - oracle_alpha(static_cast<std::int64_t>(s.t), T)) <= 1e-12;
    alphas &= std::abs(s.pi - oracle_pi(static_cast<std::int64_t>(s.t), T)) <= 1e-12;
  }
  const bool c = !run.steps.empty() && gap <= 1e-12 && alphas;

  return {a && b && c,
          std::string("(a) ") + (a ? "ok" : "FAIL") + ", ran " + std::to_string(rep.stage2_steps_run) +
              " steps, w+m = " + std::to_string(w_plus_m) + (rep.stopped_early ? ", stopped early" : "") +
              "; (b) " + (b ? "ok" : "FAIL") + ", selected step " + std::to_string(rep.selected_step) + " F1 " +
              num(rep.selected_score) + ", max " + num(best) + ", re-scored " + num(run.revalidated) + "; (c) " +
              (c ? "ok" : "FAIL") + ", max identity gap " + num(gap) + " over " + std::to_string(run.steps.size()) +
              " steps"};
}

struct AblationSummary {
  std::vector<std::uint64_t> seeds;
  std::map<Variant, double> f1, consistency;
  std::map<Variant, std::vector<double>> f1_by_seed, cons_by_seed;
  bool all_ok = true;
  double seconds = 0.0;
};

AblationSummary run_ablation(Harness& h, const std::vector<std::uint64_t>& seeds) {
  AblationSummary s;
  s.seeds = seeds;
  for (Variant v : {Variant::Full, Variant::Sft, Variant::NoStage1, Variant::NoScheduledSampling}) {
    for (auto seed : seeds) {
      const auto& c = h.cell(v, seed);
      s.all_ok &= c.ok;
      s.seconds += c.seconds;
      s.f1_by_seed[v].push_back(c.ok ? c.metrics.macro_f1 : 0.0);
      s.cons_by_seed[v].push_back(c.ok && c.metrics.consistency ? *c.metrics.consistency : 0.0);
    }
    s.f1[v] = cli::median(s.f1_by_seed[v]);
    s.consistency[v] = cli::median(s.cons_by_seed[v]);
  }
  return s;
}

struct Comparison {
  std::string name;
  bool holds = false;
  bool tied = false;  // every per-seed difference within 0.005
};

std::vector<Comparison> compare(const AblationSummary& s) {
  auto cmp = [&](const std::string& name, const std::map<Variant, double>& med,
                 const std::map<Variant, std::vector<double>>& by_seed, Variant a, Variant b) {
    Comparison c{name, med.at(a) >= med.at(b), true};
    for (std::size_t i = 0; i < s.seeds.size(); ++i) c.tied &= std::abs(by_seed.at(a)[i] - by_seed.at(b)[i]) <= 0.005;
    return c;
  };
  return {cmp("F1 full >= no-stage1", s.f1, s.f1_by_seed, Variant::Full, Variant::NoStage1),
          cmp("F1 full >= sft", s.f1, s.f1_by_seed, Variant::Full, Variant::Sft),
          cmp("consistency full >= no-scheduled-sampling", s.consistency, s.cons_by_seed, Variant::Full,
              Variant::NoScheduledSampling)};
}

std::string describe(const AblationSummary& s) {
  std::string out = "seeds";
  for (auto seed : s.seeds) out += " " + std::to_string(seed);
  for (const auto& [v, f] : s.f1) {
    out += "; " + curriculum::to_string(v) + " F1 " + num(f) + " cons " + num(s.consistency.at(v));
  }
  return out;
}

std::optional<AblationSummary> final_ablation;

Outcome check_ablation(Harness& h) {
  auto summary = run_ablation(h, {0, 1, 2});
  double seconds = summary.seconds;
  auto comps = compare(summary);
  bool retried = false;
  const bool failed = std::any_of(comps.begin(), comps.end(), [](const Comparison& c) { return !c.holds; });
  const bool failed_on_tie =
      std::all_of(comps.begin(), comps.end(), [](const Comparison& c) { return c.holds || c.tied; });
  if (failed && failed_on_tie) {
    spdlog::info("ablation failed within the tie margin; repeating with seeds 3, 4, 5");
    summary = run_ablation(h, {3, 4, 5});
    seconds += summary.seconds;
    comps = compare(summary);
    retried = true;
  }
  final_ablation = summary;
  bool pass = summary.all_ok && seconds <= 90 * 60;
  std::string detail = describe(summary);
  for (const auto& c : comps) {
    pass &= c.holds;
    detail += "; " + c.name + (c.holds ? " holds" : " FAILS");
  }
  if (retried) detail += "; repeated once after a tie";
  if (!summary.all_ok) detail += "; a cell failed to train";
  detail += "; " + num(seconds, 4) + " s";
  return {pass, detail, seconds};
}

Outcome check_consistency(Harness& h) {
  const auto& run = h.full_seed0();
  if (!run.cell.ok) return {false, "training failed: " + run.cell.error};
  const auto cons = run.cell.metrics.consistency;
  if (!final_ablation) final_ablation = run_ablation(h, {0, 1, 2});
  const auto& s = *final_ablation;
  std::vector<double> gaps;
  for (std::size_t i = 0; i < s.seeds.size(); ++i) {
    gaps.push_back(s.cons_by_seed.at(Variant::Full)[i] - s.cons_by_seed.at(Variant::NoScheduledSampling)[i]);
  }
  const double gap = cli::median(gaps);
  std::string per_seed;
  for (double g : gaps) per_seed += (per_seed.empty() ? "" : ", ") + num(g);
  return {cons && *cons >= 0.90 && gap >= 0.0,
          "full-recipe consistency " + (cons ? num(*cons) : std::string("missing")) + ", median gap vs no-scheduled-sampling " +
              num(gap) + " (per seed " + per_seed + ")"};
}

// ---------------------------------------------------------------- determinism

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome check_determinism(double learnability_seconds) {
  // A reduced configuration keeps two complete runs well inside the budget.
  cli::RunConfig cfg;
  cfg.data.synthetic_examples = 600;
  cfg.train.schedule.total_steps = 400;
  cfg.train.stage1_max_steps = 200;
  cfg.train.stage1_eval_interval = 50;
  const fs::path root = fs::temp_directory_path() / "r2d-acceptance-determinism";
  fs::remove_all(root);
  const auto start = Clock::now();
  if (cli::cmd_gen_data(cfg, root / "data") != cli::kExitOk) return {false, "cmd_gen_data failed"};
  cfg.data.dir = (root / "data").string();
  std::vector<std::string> metrics;
  std::vector<std::vector<std::uint8_t>> payloads;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = root / name;
    if (cli::cmd_train(cfg, dir) != cli::kExitOk) return {false, "cmd_train failed"};
    std::ostringstream printed;
    if (cli::cmd_evaluate(dir / "checkpoint.r2d", root / "data" / "test.jsonl", dir, printed) != cli::kExitOk) {
      return {false, "cmd_evaluate failed"};
    }
    metrics.push_back(read_bytes(dir / "metrics.json"));
    payloads.push_back(curriculum::checkpoint_payload(dir / "checkpoint.r2d"));
  }
  const double seconds = since(start);
  const bool same_metrics = !metrics[0].empty() && metrics[0] == metrics[1];
  const bool same_payload = !payloads[0].empty() && payloads[0] == payloads[1];
  const double budget = 2.0 * learnability_seconds;
  return {same_metrics && same_payload && seconds <= budget,
          std::string("metrics JSON ") + (same_metrics ? "identical" : "DIFFERENT") + " (" +
              std::to_string(metrics[0].size()) + " bytes), checkpoint payload " +
              (same_payload ? "bit-identical" : "DIFFERENT") + " (" + std::to_string(payloads[0].size()) +
              " bytes), " + num(seconds, 3) + " s for both runs (budget " + num(budget, 3) + " s)",
          seconds};
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("R2D_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  else spdlog::set_level(spdlog::level::warn);

  std::set<std::string> wanted(argv + 1, argv + argc);
  auto want = [&](const std::string& name) { return wanted.empty() || wanted.contains(name); };

  Harness* harness = nullptr;
  std::optional<Harness> storage;
  auto h = [&]() -> Harness& {
    if (!harness) harness = &storage.emplace();
    return *harness;
  };

  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  bool all = true;
  auto run = [&](const std::string& name, const std::string& title, const std::function<Outcome()>& fn) {
    if (!want(name)) return;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double wall = since(start);
    if (o.seconds == 0.0) o.seconds = wall;
    all &= o.pass;
    std::printf("[%s] %-22s %s (%s)\n", o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
                (num(wall, 3) + " s").c_str());
    std::fflush(stdout);
    results.push_back({{"criterion", name}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", wall}});
  };

  run("schedule", "schedule exactness", check_schedule);
  run("gradients", "gradient fidelity", check_gradients);
  run("metrics", "metric oracles", check_metrics);
  run("learnability", "learnability", [&] { return check_learnability(h()); });
  run("ablation", "ablation direction", [&] { return check_ablation(h()); });
  run("consistency", "exposure-bias check", [&] { return check_consistency(h()); });
  run("determinism", "determinism", [&] {
    // Budget is twice the learnability run when that ran; 30 min otherwise.
    const double base = harness ? h().full_seed0().cell.seconds : 15 * 60.0;
    return check_determinism(base);
  });
  run("protocol", "protocol conformance", [&] { return check_protocol(h()); });

  std::ofstream("acceptance_results.json") << results.dump(2) << "\n";
  return all ? 0 : 1;
}
