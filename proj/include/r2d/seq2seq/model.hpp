#pragma once

#include <span>

#include "json.hpp"
#include "r2d/seq2seq/vocab.hpp"
#include "r2d/tensor/ops.hpp"
#include "r2d/tensor/optimizer.hpp"
#include "r2d/tensor/rng.hpp"

namespace r2d::seq2seq {

struct ModelConfig {
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_len = 128;
  std::size_t vocab_size = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Pre-norm transformer encoder-decoder with shared token embeddings,
/// sinusoidal absolute positions and GELU feed-forward blocks.
struct ModelParams {
  ModelConfig config;
  tensor::ParameterSet tensors;
};

/// Scaled-uniform (Glorot) weights, zero biases, unit layer-norm gains.
ModelParams init_model(const ModelConfig& config, tensor::Rng& rng);

/// Encoder output for a packed batch of prompts.
struct EncodedBatch {
  tensor::Var memory;                // [sum(prompt lengths) x d_model]
  std::vector<std::size_t> offsets;  // segment boundaries, size batch + 1
};

EncodedBatch encode(tensor::Tape& tape, const ModelParams& params,
                    std::span<const TokenSeq> prompts);

/// Final decoder states for a packed batch of decoder inputs (each starting
/// with <bos>), attending to the matching encoder segments.
tensor::Var decode_states(tensor::Tape& tape, const ModelParams& params,
                          const EncodedBatch& encoded,
                          std::span<const TokenSeq> decoder_inputs);

/// Projects decoder states to vocabulary logits.
tensor::Var output_logits(tensor::Tape& tape, const ModelParams& params, tensor::Var states);

/// Teacher-forced loss for a batch: each target is extended with <eos>, the
/// decoder sees <bos> followed by the gold prefix, and the result is the mean
/// over examples of each example's mean per-token negative log-likelihood.
tensor::Var sequence_nll(tensor::Tape& tape, const ModelParams& params,
                         std::span<const TokenSeq> prompts, std::span<const TokenSeq> targets);

/// Single-example form of sequence_nll.
tensor::Var forward_nll(tensor::Tape& tape, const ModelParams& params, const TokenSeq& prompt,
                        const TokenSeq& target);

/// Sinusoidal position table [rows x d_model] for positions 0..rows-1.
tensor::Tensor sinusoidal_positions(std::size_t rows, std::size_t d_model);

}  // namespace r2d::seq2seq
