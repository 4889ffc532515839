#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "r2d/tensor/tape.hpp"

namespace r2d::tensor {

using ClassId = std::uint32_t;

// Differentiable primitives. Each call appends exactly one node to the tape
// of its operands; all operands must live on the same tape.

Var matmul(Var a, Var b);
/// x[m x k] * w[k x n] + b[n]
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var gelu(Var x);
/// Row-wise layer normalisation with learned gain and bias.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
/// Rows of `table` selected by `ids`, each multiplied by `factor`.
Var embedding(Var table, std::span<const ClassId> ids, double factor = 1.0);
/// Rows of x selected by `rows`, in that order.
Var gather_rows(Var x, std::span<const std::size_t> rows);

/// Multi-head scaled dot-product attention over packed ragged segments.
/// q_offsets/kv_offsets have one entry per segment plus a final end marker.
struct AttentionSpec {
  std::vector<std::size_t> q_offsets;
  std::vector<std::size_t> kv_offsets;
  std::size_t heads = 1;
  bool causal = false;
};
Var attention(Var q, Var k, Var v, const AttentionSpec& spec);

/// Mean over rows of -log softmax(logits)[target].
Var softmax_cross_entropy(Var logits, std::span<const ClassId> targets);
/// Sum over rows of weight * -log softmax(logits)[target].
Var weighted_cross_entropy(Var logits, std::span<const ClassId> targets,
                           std::span<const double> weights);

/// Row-wise softmax, outside any tape.
Tensor softmax(const Tensor& logits);

}  // namespace r2d::tensor
