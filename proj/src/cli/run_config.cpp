#include "r2d/cli/run_config.hpp"

#include <fstream>
#include <set>

#include "r2d/errors.hpp"

namespace r2d::cli {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

seq2seq::ModelConfig model_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"encoder_layers", "decoder_layers", "d_model", "heads", "d_ff", "max_len"}, "model");
  seq2seq::ModelConfig m;
  m.encoder_layers = j.value("encoder_layers", m.encoder_layers);
  m.decoder_layers = j.value("decoder_layers", m.decoder_layers);
  m.d_model = j.value("d_model", m.d_model);
  m.heads = j.value("heads", m.heads);
  m.d_ff = j.value("d_ff", m.d_ff);
  m.max_len = j.value("max_len", m.max_len);
  return m;
}

DataConfig data_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"grammar", "synthetic_examples", "fractions", "dir", "train_jsonl", "val_jsonl", "test_jsonl"},
                 "data");
  DataConfig d;
  d.grammar = j.value("grammar", d.grammar);
  d.synthetic_examples = j.value("synthetic_examples", d.synthetic_examples);
  if (j.contains("fractions")) {
    const auto& f = j.at("fractions");
    reject_unknown(f, {"train", "val", "test"}, "data.fractions");
    d.fractions.train = f.value("train", d.fractions.train);
    d.fractions.val = f.value("val", d.fractions.val);
    d.fractions.test = f.value("test", d.fractions.test);
  }
  d.dir = j.value("dir", d.dir);
  d.train_jsonl = j.value("train_jsonl", d.train_jsonl);
  d.val_jsonl = j.value("val_jsonl", d.val_jsonl);
  d.test_jsonl = j.value("test_jsonl", d.test_jsonl);
  return d;
}

AblationConfig ablation_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"variants", "seeds"}, "ablation");
  AblationConfig a;
  if (j.contains("variants")) {
    a.variants.clear();
    for (const auto& v : j.at("variants")) a.variants.push_back(curriculum::parse_variant(v.get<std::string>()));
  }
  if (j.contains("seeds")) a.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  return a;
}

}  // namespace

void RunConfig::validate() const {
  auto m = model;
  m.vocab_size = 16;  // filled from the data at training time
  m.validate();
  train_config().validate();
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (data.synthetic_examples == 0) throw ConfigError("data.synthetic_examples must be positive");
  const double sum = data.fractions.train + data.fractions.val + data.fractions.test;
  if (data.fractions.train < 0 || data.fractions.val < 0 || data.fractions.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("data.fractions must be non-negative and sum to 1");
  }
  if (ablation.variants.empty()) throw ConfigError("ablation.variants must not be empty");
  if (ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
}

curriculum::TrainConfig RunConfig::train_config() const {
  auto t = train;
  t.seed = seed;
  t.variant = variant;
  return t;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["variant"] = curriculum::to_string(variant);
  j["out_dir"] = out_dir;
  j["model"] = {{"encoder_layers", model.encoder_layers}, {"decoder_layers", model.decoder_layers},
                {"d_model", model.d_model},               {"heads", model.heads},
                {"d_ff", model.d_ff},                     {"max_len", model.max_len}};
  nlohmann::ordered_json t;
  const auto tj = train.to_json();
  for (const char* key : {"batch_size", "lr", "beta1", "beta2", "epsilon", "weight_decay", "clip_norm",
                          "stage1_max_steps", "stage1_eval_interval", "stage1_patience", "stage2_patience",
                          "min_improvement"}) {
    t[key] = tj.at(key);
  }
  t["schedule"] = {{"total_steps", train.schedule.total_steps},
                   {"warmup_fraction", train.schedule.warmup_fraction},
                   {"transition_fraction", train.schedule.transition_fraction},
                   {"pi_ceiling", train.schedule.pi_ceiling},
                   {"alpha_max", train.schedule.alpha_max}};
  j["train"] = t;
  j["data"] = {{"grammar", data.grammar},
               {"synthetic_examples", data.synthetic_examples},
               {"fractions", {{"train", data.fractions.train}, {"val", data.fractions.val}, {"test", data.fractions.test}}},
               {"dir", data.dir},
               {"train_jsonl", data.train_jsonl},
               {"val_jsonl", data.val_jsonl},
               {"test_jsonl", data.test_jsonl}};
  auto variants = nlohmann::ordered_json::array();
  for (auto v : ablation.variants) variants.push_back(curriculum::to_string(v));
  j["ablation"] = {{"variants", variants}, {"seeds", ablation.seeds}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"seed", "variant", "out_dir", "model", "train", "data", "ablation"}, "config");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("variant")) c.variant = curriculum::parse_variant(j.at("variant").get<std::string>());
    c.out_dir = j.value("out_dir", c.out_dir);
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.is_object() && (t.contains("seed") || t.contains("variant"))) {
        throw ConfigError("train: seed and variant are top-level keys");
      }
      c.train = curriculum::TrainConfig::from_json(t);
    }
    if (j.contains("data")) c.data = data_from_json(j.at("data"));
    if (j.contains("ablation")) c.ablation = ablation_from_json(j.at("ablation"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.train.variant = c.variant;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (path.empty()) return from_json(nlohmann::json::object());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace r2d::cli
