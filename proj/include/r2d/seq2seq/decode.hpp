#pragma once

#include <span>

#include "r2d/seq2seq/model.hpp"

namespace r2d::seq2seq {

/// Index of the largest value; the first one wins ties.
std::size_t argmax_first(std::span<const double> values);

/// Argmax decoding: one token per step until <eos> (not included in the
/// output) or `max_len` tokens. `max_len` is additionally capped so the
/// decoder input never exceeds the model's max_len. Pure function of its
/// arguments. Throws ContractError when max_len is 0.
TokenSeq greedy_decode(const ModelParams& params, const TokenSeq& prompt, std::size_t max_len);

/// Batched form; results are identical to calling greedy_decode per prompt.
std::vector<TokenSeq> greedy_decode_batch(const ModelParams& params,
                                          std::span<const TokenSeq> prompts,
                                          std::size_t max_len);

}  // namespace r2d::seq2seq
