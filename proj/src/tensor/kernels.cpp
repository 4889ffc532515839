#include "r2d/tensor/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace r2d::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

// crow[0..n) += sum over p of arow[p] * b[p, 0..n)
inline void accumulate_row(const double* __restrict arow, const double* __restrict b,
                           double* __restrict crow, std::size_t k, std::size_t n) {
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
    const double* b0 = b + p * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    for (std::size_t j = 0; j < n; ++j) {
      crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
  }
  for (; p < k; ++p) {
    const double a0 = arow[p];
    const double* b0 = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += a0 * b0[j];
  }
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

void matmul_rows(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    accumulate_row(a + i * k, b, crow, k, n);
  }
}

const double kGeluK = std::sqrt(2.0 / std::numbers::pi);
constexpr double kGeluC = 0.044715;

std::vector<std::size_t> prob_bases(const AttentionLayout& layout) {
  std::vector<std::size_t> bases(layout.segments() * layout.heads + 1, 0);
  std::size_t t = 0;
  for (std::size_t s = 0; s < layout.segments(); ++s) {
    const std::size_t block = (layout.q_offsets[s + 1] - layout.q_offsets[s]) *
                              (layout.kv_offsets[s + 1] - layout.kv_offsets[s]);
    for (std::size_t h = 0; h < layout.heads; ++h, ++t) bases[t + 1] = bases[t] + block;
  }
  return bases;
}

}  // namespace

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  matmul_rows(a.data(), b.data(), c.data(), m, k, n, accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  std::vector<double> bt(k * n);
  transpose(b.data(), bt.data(), n, k);
  matmul_rows(a.data(), bt.data(), c.data(), m, k, n, accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  std::vector<double> at(k * m);
  transpose(a.data(), at.data(), m, k);
  matmul_rows(at.data(), b.data(), c.data(), k, m, n, accumulate);
}

void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
  }
}

void layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y,
                        std::span<double> xhat, std::span<double> rstd,
                        std::size_t rows, std::size_t cols, double eps) {
  const double n = static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    const double inv = 1.0 / std::sqrt(var / n + eps);
    rstd[r] = inv;
    double* hr = xhat.data() + r * cols;
    double* yr = y.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      hr[c] = (xr[c] - mean) * inv;
      yr[c] = gamma[c] * hr[c] + beta[c];
    }
  }
}

void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat,
                         std::span<const double> rstd, std::span<const double> gamma,
                         std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta, std::size_t rows, std::size_t cols) {
  const double n = static_cast<double>(cols);
  if (!dx.empty()) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dyr = dy.data() + r * cols;
      const double* hr = xhat.data() + r * cols;
      double sum_g = 0.0;
      double sum_gh = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = dyr[c] * gamma[c];
        sum_g += g;
        sum_gh += g * hr[c];
      }
      const double scale = rstd[r] / n;
      double* dxr = dx.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        dxr[c] += scale * (n * dyr[c] * gamma[c] - sum_g - hr[c] * sum_gh);
      }
    }
  }
  // Column reductions run row-major in a fixed order.
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dyr = dy.data() + r * cols;
    const double* hr = xhat.data() + r * cols;
    if (!dgamma.empty()) {
      for (std::size_t c = 0; c < cols; ++c) dgamma[c] += dyr[c] * hr[c];
    }
    if (!dbeta.empty()) {
      for (std::size_t c = 0; c < cols; ++c) dbeta[c] += dyr[c];
    }
  }
}

void gelu_forward(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kGeluK * (v + kGeluC * v * v * v)));
  }
}

void gelu_backward(std::span<const double> x, std::span<const double> dy,
                   std::span<double> dx) {
  const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    const double t = std::tanh(kGeluK * (v + kGeluC * v * v * v));
    dx[i] += dy[i] * (0.5 * (1.0 + t) +
                      0.5 * v * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * v * v));
  }
}

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out,
                       std::span<double> probs, const AttentionLayout& layout) {
  const std::size_t d = layout.model_dim();
  const std::size_t dh = layout.head_dim;
  const std::size_t heads = layout.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto bases = prob_bases(layout);
  const std::size_t tasks = layout.segments() * heads;

#pragma omp parallel for schedule(dynamic, 4) if (tasks > 8)
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t s = t / heads;
    const std::size_t h = t % heads;
    const std::size_t q0 = layout.q_offsets[s];
    const std::size_t lq = layout.q_offsets[s + 1] - q0;
    const std::size_t k0 = layout.kv_offsets[s];
    const std::size_t lk = layout.kv_offsets[s + 1] - k0;
    double* p = probs.data() + bases[t];
    for (std::size_t i = 0; i < lq; ++i) {
      const std::size_t visible = layout.causal ? std::min(lk, i + 1) : lk;
      const double* qi = q.data() + (q0 + i) * d + h * dh;
      double* pi = p + i * lk;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) {
        const double* kj = k.data() + (k0 + j) * d + h * dh;
        double score = 0.0;
        for (std::size_t c = 0; c < dh; ++c) score += qi[c] * kj[c];
        pi[j] = score * scale;
        mx = std::max(mx, pi[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        pi[j] = std::exp(pi[j] - mx);
        sum += pi[j];
      }
      const double inv = 1.0 / sum;
      for (std::size_t j = 0; j < visible; ++j) pi[j] *= inv;
      for (std::size_t j = visible; j < lk; ++j) pi[j] = 0.0;
      double* oi = out.data() + (q0 + i) * d + h * dh;
      std::fill(oi, oi + dh, 0.0);
      for (std::size_t j = 0; j < visible; ++j) {
        const double* vj = v.data() + (k0 + j) * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += pi[j] * vj[c];
      }
    }
  }
}

void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv,
                        const AttentionLayout& layout) {
  const std::size_t d = layout.model_dim();
  const std::size_t dh = layout.head_dim;
  const std::size_t heads = layout.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto bases = prob_bases(layout);
  const std::size_t tasks = layout.segments() * heads;

  // Tasks write disjoint (row range, head column) blocks of dq/dk/dv.
#pragma omp parallel for schedule(dynamic, 4) if (tasks > 8)
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t s = t / heads;
    const std::size_t h = t % heads;
    const std::size_t q0 = layout.q_offsets[s];
    const std::size_t lq = layout.q_offsets[s + 1] - q0;
    const std::size_t k0 = layout.kv_offsets[s];
    const std::size_t lk = layout.kv_offsets[s + 1] - k0;
    const double* p = probs.data() + bases[t];
    std::vector<double> dp(lk);
    for (std::size_t i = 0; i < lq; ++i) {
      const std::size_t visible = layout.causal ? std::min(lk, i + 1) : lk;
      const double* pi = p + i * lk;
      const double* doi = dout.data() + (q0 + i) * d + h * dh;
      const double* qi = q.data() + (q0 + i) * d + h * dh;
      double dot = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double* vj = v.data() + (k0 + j) * d + h * dh;
        double acc = 0.0;
        for (std::size_t c = 0; c < dh; ++c) acc += doi[c] * vj[c];
        dp[j] = acc;
        dot += pi[j] * acc;
      }
      for (std::size_t j = 0; j < visible; ++j) {
        if (!dv.empty()) {
          double* dvj = dv.data() + (k0 + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) dvj[c] += pi[j] * doi[c];
        }
        const double ds = pi[j] * (dp[j] - dot) * scale;
        const double* kj = k.data() + (k0 + j) * d + h * dh;
        if (!dq.empty()) {
          double* dqi = dq.data() + (q0 + i) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
        }
        if (!dk.empty()) {
          double* dkj = dk.data() + (k0 + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

}  // namespace r2d::kernels
