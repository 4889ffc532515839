#include "r2d/seq2seq/decode.hpp"

#include <algorithm>
#include <numeric>

#include "r2d/errors.hpp"

namespace r2d::seq2seq {

using tensor::Tape;
using tensor::Tensor;

namespace {

constexpr std::size_t kChunk = 64;

void decode_chunk(const ModelParams& params, std::span<const TokenSeq> prompts,
                  std::size_t steps, std::span<TokenSeq> results) {
  const std::size_t d = params.config.d_model;
  Tensor memory;
  std::vector<std::size_t> mem_offsets;
  {
    Tape tape(Tape::Mode::Inference);
    EncodedBatch enc = encode(tape, params, prompts);
    memory = enc.memory.value();
    mem_offsets = enc.offsets;
  }

  std::vector<std::size_t> active(prompts.size());
  std::iota(active.begin(), active.end(), 0);
  for (std::size_t step = 0; step < steps && !active.empty(); ++step) {
    // Encoder rows of the still-active prompts.
    std::vector<std::size_t> offsets{0};
    std::vector<double> rows;
    for (std::size_t i : active) {
      const std::size_t begin = mem_offsets[i], end = mem_offsets[i + 1];
      rows.insert(rows.end(), memory.raw() + begin * d, memory.raw() + end * d);
      offsets.push_back(offsets.back() + (end - begin));
    }
    std::vector<TokenSeq> inputs;
    std::vector<std::size_t> last_rows;
    std::size_t cursor = 0;
    for (std::size_t i : active) {
      TokenSeq in{Vocab::kBos};
      in.insert(in.end(), results[i].begin(), results[i].end());
      cursor += in.size();
      last_rows.push_back(cursor - 1);
      inputs.push_back(std::move(in));
    }

    Tape tape(Tape::Mode::Inference);
    EncodedBatch enc{tape.constant(Tensor({offsets.back(), d}, std::move(rows))), offsets};
    auto states = decode_states(tape, params, enc, inputs);
    auto logits = output_logits(tape, params, tensor::gather_rows(states, last_rows));
    const Tensor& lv = logits.value();
    const std::size_t vocab = lv.cols();

    std::vector<std::size_t> still;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto next = static_cast<TokenId>(
          argmax_first(std::span(lv.raw() + a * vocab, vocab)));
      if (next == Vocab::kEos) continue;
      results[active[a]].push_back(next);
      still.push_back(active[a]);
    }
    active = std::move(still);
  }
}

}  // namespace

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

TokenSeq greedy_decode(const ModelParams& params, const TokenSeq& prompt, std::size_t max_len) {
  return greedy_decode_batch(params, std::span(&prompt, 1), max_len).front();
}

std::vector<TokenSeq> greedy_decode_batch(const ModelParams& params,
                                          std::span<const TokenSeq> prompts,
                                          std::size_t max_len) {
  if (max_len == 0) throw ContractError("greedy_decode: max_len must be at least 1");
  const std::size_t steps = std::min(max_len, params.config.max_len - 1);
  std::vector<TokenSeq> results(prompts.size());
  for (std::size_t begin = 0; begin < prompts.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, prompts.size() - begin);
    decode_chunk(params, prompts.subspan(begin, n), steps,
                 std::span(results).subspan(begin, n));
  }
  return results;
}

}  // namespace r2d::seq2seq
