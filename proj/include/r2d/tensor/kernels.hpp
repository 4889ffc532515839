#pragma once

// Dense kernels behind the tape primitives.
//
// Every kernel exists twice: the top-level version is OpenMP-parallel over
// independent output rows (or attention segment/head blocks), the version in
// `serial` is a plain loop nest kept as the reference for tests and the
// benchmark. Each output element is produced by exactly one thread with a
// fixed summation order, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace r2d::kernels {

/// Row layout shared by the attention kernels. Queries of segment s occupy
/// rows [q_offsets[s], q_offsets[s+1]); keys/values of the same segment occupy
/// [kv_offsets[s], kv_offsets[s+1]). Segments never attend across each other.
struct AttentionLayout {
  std::span<const std::size_t> q_offsets;
  std::span<const std::size_t> kv_offsets;
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  bool causal = false;

  std::size_t segments() const { return q_offsets.size() - 1; }
  std::size_t model_dim() const { return heads * head_dim; }
  /// Number of doubles needed to keep the softmax probabilities.
  std::size_t prob_size() const;
  /// Offset of the (segment, head) probability block.
  std::size_t prob_offset(std::size_t segment, std::size_t head) const;
};

// C[m x n] (+)= A[m x k] * B[k x n]
void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C[m x n] (+)= A[m x k] * B[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C[k x n] (+)= A[m x k]^T * B[m x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);

void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols);

// y = gamma * xhat + beta with xhat = (x - mean) * rstd per row.
void layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y,
                        std::span<double> xhat, std::span<double> rstd,
                        std::size_t rows, std::size_t cols, double eps);
// Accumulates into dx, dgamma, dbeta. Any of the three may be empty to skip it.
void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat,
                         std::span<const double> rstd, std::span<const double> gamma,
                         std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta, std::size_t rows, std::size_t cols);

// tanh approximation of GELU.
void gelu_forward(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> dy,
                   std::span<double> dx);

// out[nq x d]; probs receives the softmax weights (layout.prob_size()).
void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out,
                       std::span<double> probs, const AttentionLayout& layout);
// Accumulates into dq, dk, dv; any may be empty to skip it.
void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv,
                        const AttentionLayout& layout);

namespace serial {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols);
void layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y,
                        std::span<double> xhat, std::span<double> rstd,
                        std::size_t rows, std::size_t cols, double eps);
void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat,
                         std::span<const double> rstd, std::span<const double> gamma,
                         std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta, std::size_t rows, std::size_t cols);
void gelu_forward(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> dy,
                   std::span<double> dx);
void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out,
                       std::span<double> probs, const AttentionLayout& layout);
void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv,
                        const AttentionLayout& layout);

}  // namespace serial

}  // namespace r2d::kernels
