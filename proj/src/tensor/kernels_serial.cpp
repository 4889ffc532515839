#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "r2d/tensor/kernels.hpp"

namespace r2d::kernels {

std::size_t AttentionLayout::prob_size() const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < segments(); ++s) {
    total += heads * (q_offsets[s + 1] - q_offsets[s]) * (kv_offsets[s + 1] - kv_offsets[s]);
  }
  return total;
}

std::size_t AttentionLayout::prob_offset(std::size_t segment, std::size_t head) const {
  std::size_t offset = 0;
  for (std::size_t s = 0; s < segment; ++s) {
    offset += heads * (q_offsets[s + 1] - q_offsets[s]) * (kv_offsets[s + 1] - kv_offsets[s]);
  }
  const std::size_t lq = q_offsets[segment + 1] - q_offsets[segment];
  const std::size_t lk = kv_offsets[segment + 1] - kv_offsets[segment];
  return offset + head * lq * lk;
}

namespace serial {

void matmul_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) sum += a[i * k + p] * b[i * n + j];
      c[p * n + j] = accumulate ? c[p * n + j] + sum : sum;
    }
  }
}

void softmax_rows(std::span<double> x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
}

void layer_norm_forward(std::span<const double> x, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y,
                        std::span<double> xhat, std::span<double> rstd,
                        std::size_t rows, std::size_t cols, double eps) {
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x[r * cols + c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x[r * cols + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    rstd[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (x[r * cols + c] - mean) * inv;
      xhat[r * cols + c] = h;
      y[r * cols + c] = gamma[c] * h + beta[c];
    }
  }
}

void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat,
                         std::span<const double> rstd, std::span<const double> gamma,
                         std::span<double> dx, std::span<double> dgamma,
                         std::span<double> dbeta, std::size_t rows, std::size_t cols) {
  const double n = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum_g = 0.0;
    double sum_gh = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = dy[r * cols + c] * gamma[c];
      sum_g += g;
      sum_gh += g * xhat[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      if (!dx.empty()) {
        const double g = dy[i] * gamma[c];
        dx[i] += rstd[r] / n * (n * g - sum_g - xhat[i] * sum_gh);
      }
      if (!dgamma.empty()) dgamma[c] += dy[i] * xhat[i];
      if (!dbeta.empty()) dbeta[c] += dy[i];
    }
  }
}

namespace {
constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

void gelu_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kGeluK * (v + kGeluC * v * v * v)));
  }
}

void gelu_backward(std::span<const double> x, std::span<const double> dy,
                   std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double t = std::tanh(kGeluK * (v + kGeluC * v * v * v));
    const double d = 0.5 * (1.0 + t) +
                     0.5 * v * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * v * v);
    dx[i] += dy[i] * d;
  }
}

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out,
                       std::span<double> probs, const AttentionLayout& layout) {
  const std::size_t d = layout.model_dim();
  const std::size_t dh = layout.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t s = 0; s < layout.segments(); ++s) {
    const std::size_t q0 = layout.q_offsets[s];
    const std::size_t lq = layout.q_offsets[s + 1] - q0;
    const std::size_t k0 = layout.kv_offsets[s];
    const std::size_t lk = layout.kv_offsets[s + 1] - k0;
    for (std::size_t h = 0; h < layout.heads; ++h) {
      double* p = probs.data() + layout.prob_offset(s, h);
      for (std::size_t i = 0; i < lq; ++i) {
        const std::size_t visible = layout.causal ? std::min(lk, i + 1) : lk;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lk; ++j) {
          double score = 0.0;
          if (j < visible) {
            for (std::size_t c = 0; c < dh; ++c) {
              score += q[(q0 + i) * d + h * dh + c] * k[(k0 + j) * d + h * dh + c];
            }
            score *= scale;
            mx = std::max(mx, score);
          }
          p[i * lk + j] = score;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < lk; ++j) {
          p[i * lk + j] = j < visible ? std::exp(p[i * lk + j] - mx) : 0.0;
          sum += p[i * lk + j];
        }
        for (std::size_t j = 0; j < lk; ++j) p[i * lk + j] /= sum;
        for (std::size_t c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < lk; ++j) acc += p[i * lk + j] * v[(k0 + j) * d + h * dh + c];
          out[(q0 + i) * d + h * dh + c] = acc;
        }
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
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t s = 0; s < layout.segments(); ++s) {
    const std::size_t q0 = layout.q_offsets[s];
    const std::size_t lq = layout.q_offsets[s + 1] - q0;
    const std::size_t k0 = layout.kv_offsets[s];
    const std::size_t lk = layout.kv_offsets[s + 1] - k0;
    for (std::size_t h = 0; h < layout.heads; ++h) {
      const double* p = probs.data() + layout.prob_offset(s, h);
      for (std::size_t i = 0; i < lq; ++i) {
        // dP_ij = dout_i . v_j ; dS = P * (dP - sum_j P dP)
        std::vector<double> dp(lk, 0.0);
        double dot = 0.0;
        for (std::size_t j = 0; j < lk; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            acc += dout[(q0 + i) * d + h * dh + c] * v[(k0 + j) * d + h * dh + c];
          }
          dp[j] = acc;
          dot += p[i * lk + j] * acc;
        }
        for (std::size_t j = 0; j < lk; ++j) {
          const double pij = p[i * lk + j];
          if (!dv.empty()) {
            for (std::size_t c = 0; c < dh; ++c) {
              dv[(k0 + j) * d + h * dh + c] += pij * dout[(q0 + i) * d + h * dh + c];
            }
          }
          const double ds = pij * (dp[j] - dot) * scale;
          for (std::size_t c = 0; c < dh; ++c) {
            if (!dq.empty()) dq[(q0 + i) * d + h * dh + c] += ds * k[(k0 + j) * d + h * dh + c];
            if (!dk.empty()) dk[(k0 + j) * d + h * dh + c] += ds * q[(q0 + i) * d + h * dh + c];
          }
        }
      }
    }
  }
}

}  // namespace serial
}  // namespace r2d::kernels
