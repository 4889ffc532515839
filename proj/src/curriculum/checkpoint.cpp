#include "r2d/curriculum/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "r2d/errors.hpp"

namespace r2d::curriculum {

namespace {

constexpr const char* kMagic = "r2d-checkpoint";

void put_f32(std::vector<std::uint8_t>& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

struct RawFile {
  nlohmann::json manifest;
  std::vector<std::uint8_t> payload;
};

RawFile read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError(path.string() + ": empty checkpoint file");
  RawFile raw;
  try {
    raw.manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": unreadable checkpoint manifest (" + e.what() + ")");
  }
  if (!raw.manifest.is_object() || raw.manifest.value("format", "") != kMagic) {
    throw FormatError(path.string() + ": not an r2d checkpoint");
  }
  const int version = raw.manifest.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw FormatError(path.string() + ": checkpoint format version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointFormatVersion));
  }
  raw.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return raw;
}

}  // namespace

void round_to_storage(tensor::ParameterSet& params) {
  for (auto& entry : params.entries()) {
    for (double& v : entry.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::vector<std::uint8_t> payload;
  payload.reserve(ckpt.model.params.tensors.scalar_count() * 4);
  auto table = nlohmann::ordered_json::array();
  for (const auto& entry : ckpt.model.params.tensors.entries()) {
    table.push_back({{"name", entry.name},
                     {"shape", entry.value.shape()},
                     {"dtype", "float32"},
                     {"offset", payload.size()}});
    for (double v : entry.value.data()) put_f32(payload, v);
  }

  nlohmann::ordered_json m;
  m["format"] = kMagic;
  m["format_version"] = kCheckpointFormatVersion;
  m["config"] = ckpt.config;
  m["step"] = ckpt.step;
  m["validation_metric"] = ckpt.validation_metric;
  m["validation_score"] = ckpt.validation_score;
  m["rng_state"] = ckpt.rng_state;
  m["variant"] = to_string(ckpt.model.variant);
  m["model"] = ckpt.model.params.config.to_json();
  m["vocab"] = ckpt.model.vocab.to_json();
  m["labels"] = ckpt.model.labels;
  m["markers"] = ckpt.model.markers;
  m["max_label_tokens"] = ckpt.model.max_label_tokens;
  m["max_rationale_tokens"] = ckpt.model.max_rationale_tokens;
  m["tensors"] = table;
  m["payload_bytes"] = payload.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string header = m.dump() + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  RawFile raw = read_raw(path);
  const auto& m = raw.manifest;
  Checkpoint c;
  try {
    c.config = m.at("config");
    c.step = m.at("step").get<std::uint64_t>();
    c.validation_metric = m.at("validation_metric").get<std::string>();
    c.validation_score = m.at("validation_score").get<double>();
    c.rng_state = m.at("rng_state").get<std::uint64_t>();
    c.model.variant = parse_variant(m.at("variant").get<std::string>());
    c.model.params.config = seq2seq::ModelConfig::from_json(m.at("model"));
    c.model.vocab = seq2seq::Vocab::from_json(m.at("vocab"));
    c.model.labels = m.at("labels").get<std::vector<std::string>>();
    c.model.markers = m.at("markers").get<std::map<std::string, std::string>>();
    c.model.max_label_tokens = m.at("max_label_tokens").get<std::size_t>();
    c.model.max_rationale_tokens = m.at("max_rationale_tokens").get<std::size_t>();
    if (m.at("payload_bytes").get<std::size_t>() != raw.payload.size()) {
      throw FormatError(path.string() + ": payload is " + std::to_string(raw.payload.size()) +
                        " bytes, manifest says " + m.at("payload_bytes").dump());
    }
    for (const auto& t : m.at("tensors")) {
      if (t.at("dtype") != "float32") throw FormatError(path.string() + ": unsupported dtype " + t.at("dtype").dump());
      tensor::Tensor value(t.at("shape").get<tensor::Shape>());
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + value.size() * 4 > raw.payload.size()) {
        throw FormatError(path.string() + ": tensor " + t.at("name").dump() + " runs past the payload");
      }
      auto data = value.data();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_f32(raw.payload.data() + offset + 4 * i);
      c.model.params.tensors.add(t.at("name").get<std::string>(), std::move(value));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint manifest (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (c.model.params.config.vocab_size != c.model.vocab.size()) {
    throw FormatError(path.string() + ": model vocab_size disagrees with stored vocabulary");
  }
  tensor::Rng unused(0);
  const auto layout = seq2seq::init_model(c.model.params.config, unused).tensors;
  bool same_layout = layout.size() == c.model.params.tensors.size();
  for (std::size_t i = 0; same_layout && i < layout.size(); ++i) {
    const auto& want = layout.entries()[i];
    const auto& got = c.model.params.tensors.entries()[i];
    same_layout = want.name == got.name && want.value.shape() == got.value.shape();
  }
  if (!same_layout) throw FormatError(path.string() + ": tensor table does not match the model config");
  return c;
}

std::vector<std::uint8_t> checkpoint_payload(const std::filesystem::path& path) {
  return read_raw(path).payload;
}

}  // namespace r2d::curriculum
