#include "r2d/seq2seq/model.hpp"

#include <cmath>
#include <string>

#include "r2d/errors.hpp"

namespace r2d::seq2seq {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

void ModelConfig::validate() const {
  if (encoder_layers == 0 || decoder_layers == 0) throw ConfigError("model needs at least one encoder and decoder layer");
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " must be a positive multiple of heads " +
                      std::to_string(heads));
  }
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (vocab_size <= Vocab::reserved_tokens().size()) throw ConfigError("vocab_size too small");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder_layers", encoder_layers}, {"decoder_layers", decoder_layers},
          {"d_model", d_model},               {"heads", heads},
          {"d_ff", d_ff},                     {"max_len", max_len},
          {"vocab_size", vocab_size}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, tensor::Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return t;
}

void add_norm(tensor::ParameterSet& p, const std::string& name, std::size_t d) {
  p.add(name + ".g", Tensor({d}, 1.0));
  p.add(name + ".b", Tensor({d}, 0.0));
}

void add_attention(tensor::ParameterSet& p, const std::string& name, std::size_t d,
                   tensor::Rng& rng) {
  for (const char* proj : {"q", "k", "v", "o"}) {
    p.add(name + ".w" + proj, glorot(d, d, rng));
    p.add(name + ".b" + proj, Tensor({d}, 0.0));
  }
}

void add_ff(tensor::ParameterSet& p, const std::string& name, std::size_t d, std::size_t ff,
            tensor::Rng& rng) {
  p.add(name + ".w1", glorot(d, ff, rng));
  p.add(name + ".b1", Tensor({ff}, 0.0));
  p.add(name + ".w2", glorot(ff, d, rng));
  p.add(name + ".b2", Tensor({d}, 0.0));
}

// Resolves parameter names to tape leaves.
struct Binder {
  Tape& tape;
  const ModelParams& params;
  Var operator()(const std::string& name) const {
    return tape.parameter(name, params.tensors.at(name));
  }
};

Var norm(const Binder& p, const std::string& name, Var x) {
  return tensor::layer_norm(x, p(name + ".g"), p(name + ".b"));
}

Var multi_head(const Binder& p, const std::string& name, Var queries, Var keys,
               const tensor::AttentionSpec& spec) {
  Var q = tensor::linear(queries, p(name + ".wq"), p(name + ".bq"));
  Var k = tensor::linear(keys, p(name + ".wk"), p(name + ".bk"));
  Var v = tensor::linear(keys, p(name + ".wv"), p(name + ".bv"));
  Var o = tensor::attention(q, k, v, spec);
  return tensor::linear(o, p(name + ".wo"), p(name + ".bo"));
}

Var feed_forward(const Binder& p, const std::string& name, Var x) {
  Var h = tensor::gelu(tensor::linear(x, p(name + ".w1"), p(name + ".b1")));
  return tensor::linear(h, p(name + ".w2"), p(name + ".b2"));
}

// Token embeddings plus per-segment positions for a packed batch.
Var embed(const Binder& p, Tape& tape, const ModelParams& params,
          std::span<const TokenSeq> seqs, std::vector<std::size_t>& offsets) {
  const std::size_t d = params.config.d_model;
  offsets.assign(1, 0);
  TokenSeq flat;
  std::size_t longest = 0;
  for (const auto& s : seqs) {
    if (s.empty()) throw ContractError("empty token sequence in batch");
    if (s.size() > params.config.max_len) {
      throw ContractError("sequence of length " + std::to_string(s.size()) +
                          " exceeds max_len " + std::to_string(params.config.max_len));
    }
    flat.insert(flat.end(), s.begin(), s.end());
    offsets.push_back(flat.size());
    longest = std::max(longest, s.size());
  }
  const Tensor table = sinusoidal_positions(longest, d);
  Tensor pos({flat.size(), d});
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t len = offsets[s + 1] - offsets[s];
    std::copy_n(table.raw(), len * d, pos.raw() + offsets[s] * d);
  }
  Var tokens = tensor::embedding(p("embed.tokens"), flat, std::sqrt(static_cast<double>(d)));
  return tensor::add(tokens, tape.constant(std::move(pos)));
}

}  // namespace

Tensor sinusoidal_positions(std::size_t rows, std::size_t d_model) {
  Tensor t({rows, d_model});
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * rate;
      t.at(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return t;
}

ModelParams init_model(const ModelConfig& config, tensor::Rng& rng) {
  config.validate();
  ModelParams m{config, {}};
  auto& p = m.tensors;
  const std::size_t d = config.d_model, ff = config.d_ff;
  p.add("embed.tokens", glorot(config.vocab_size, d, rng));
  for (std::size_t l = 0; l < config.encoder_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l);
    add_norm(p, pre + ".ln1", d);
    add_attention(p, pre + ".attn", d, rng);
    add_norm(p, pre + ".ln2", d);
    add_ff(p, pre + ".ff", d, ff, rng);
  }
  add_norm(p, "enc.ln", d);
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    const std::string pre = "dec." + std::to_string(l);
    add_norm(p, pre + ".ln1", d);
    add_attention(p, pre + ".self", d, rng);
    add_norm(p, pre + ".ln2", d);
    add_attention(p, pre + ".cross", d, rng);
    add_norm(p, pre + ".ln3", d);
    add_ff(p, pre + ".ff", d, ff, rng);
  }
  add_norm(p, "dec.ln", d);
  p.add("out.w", glorot(d, config.vocab_size, rng));
  p.add("out.b", Tensor({config.vocab_size}, 0.0));
  return m;
}

EncodedBatch encode(Tape& tape, const ModelParams& params, std::span<const TokenSeq> prompts) {
  if (prompts.empty()) throw ContractError("encode: empty batch");
  Binder p{tape, params};
  EncodedBatch out;
  Var x = embed(p, tape, params, prompts, out.offsets);
  const tensor::AttentionSpec spec{out.offsets, out.offsets, params.config.heads, false};
  for (std::size_t l = 0; l < params.config.encoder_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l);
    Var h = norm(p, pre + ".ln1", x);
    x = tensor::add(x, multi_head(p, pre + ".attn", h, h, spec));
    x = tensor::add(x, feed_forward(p, pre + ".ff", norm(p, pre + ".ln2", x)));
  }
  out.memory = norm(p, "enc.ln", x);
  return out;
}

Var decode_states(Tape& tape, const ModelParams& params, const EncodedBatch& encoded,
                  std::span<const TokenSeq> decoder_inputs) {
  if (decoder_inputs.size() + 1 != encoded.offsets.size()) {
    throw DimensionError("decode_states: " + std::to_string(decoder_inputs.size()) +
                         " decoder inputs for " + std::to_string(encoded.offsets.size() - 1) +
                         " encoded prompts");
  }
  Binder p{tape, params};
  std::vector<std::size_t> offsets;
  Var x = embed(p, tape, params, decoder_inputs, offsets);
  const tensor::AttentionSpec self_spec{offsets, offsets, params.config.heads, true};
  const tensor::AttentionSpec cross_spec{offsets, encoded.offsets, params.config.heads, false};
  for (std::size_t l = 0; l < params.config.decoder_layers; ++l) {
    const std::string pre = "dec." + std::to_string(l);
    Var h = norm(p, pre + ".ln1", x);
    x = tensor::add(x, multi_head(p, pre + ".self", h, h, self_spec));
    h = norm(p, pre + ".ln2", x);
    x = tensor::add(x, multi_head(p, pre + ".cross", h, encoded.memory, cross_spec));
    x = tensor::add(x, feed_forward(p, pre + ".ff", norm(p, pre + ".ln3", x)));
  }
  return norm(p, "dec.ln", x);
}

Var output_logits(Tape& tape, const ModelParams& params, Var states) {
  Binder p{tape, params};
  return tensor::linear(states, p("out.w"), p("out.b"));
}

Var sequence_nll(Tape& tape, const ModelParams& params, std::span<const TokenSeq> prompts,
                 std::span<const TokenSeq> targets) {
  if (prompts.empty()) throw ContractError("sequence_nll: empty batch");
  if (prompts.size() != targets.size()) {
    throw DimensionError("sequence_nll: " + std::to_string(prompts.size()) + " prompts but " +
                         std::to_string(targets.size()) + " targets");
  }
  std::vector<TokenSeq> inputs;
  TokenSeq gold;
  std::vector<double> weights;
  inputs.reserve(targets.size());
  const double per_example = 1.0 / static_cast<double>(targets.size());
  for (const auto& t : targets) {
    if (t.size() + 1 > params.config.max_len) {
      throw ContractError("target of length " + std::to_string(t.size()) +
                          " plus <eos> exceeds max_len " + std::to_string(params.config.max_len));
    }
    TokenSeq in{Vocab::kBos};
    in.insert(in.end(), t.begin(), t.end());
    inputs.push_back(std::move(in));
    gold.insert(gold.end(), t.begin(), t.end());
    gold.push_back(Vocab::kEos);
    weights.insert(weights.end(), t.size() + 1, per_example / static_cast<double>(t.size() + 1));
  }
  EncodedBatch encoded = encode(tape, params, prompts);
  Var states = decode_states(tape, params, encoded, inputs);
  return tensor::weighted_cross_entropy(output_logits(tape, params, states), gold, weights);
}

Var forward_nll(Tape& tape, const ModelParams& params, const TokenSeq& prompt,
                const TokenSeq& target) {
  return sequence_nll(tape, params, std::span(&prompt, 1), std::span(&target, 1));
}

}  // namespace r2d::seq2seq
