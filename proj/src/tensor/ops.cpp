#include "r2d/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "r2d/errors.hpp"
#include "r2d/tensor/kernels.hpp"

namespace r2d::tensor {

namespace {

Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (Var v : vars) {
    if (!v.valid()) throw ContractError("operand is not bound to a tape");
    if (tape == nullptr) tape = v.tape();
    if (v.tape() != tape) throw ContractError("operands live on different tapes");
  }
  return *tape;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()) + " differ");
  }
}

void require_vector(const Tensor& t, std::size_t n, const char* op) {
  if (t.rank() != 1 || t.size() != n) {
    throw DimensionError(std::string(op) + ": expected vector of length " +
                         std::to_string(n) + ", got " + shape_string(t.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  double* d = dst.raw();
  const double* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner extents disagree for " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::matmul_nn(av.data(), bv.data(), out.data(), m, k, n, false);
  return tape.record("matmul", std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, const Tensor& g) {
                       if (t.requires_grad(a)) {
                         kernels::matmul_nt(g.data(), b.value().data(), t.grad(a).data(),
                                            m, n, k, true);
                       }
                       if (t.requires_grad(b)) {
                         kernels::matmul_tn(a.value().data(), g.data(), t.grad(b).data(),
                                            m, k, n, true);
                       }
                     });
}

Var linear(Var x, Var w, Var b) {
  Tape& tape = same_tape({x, w, b});
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_matrix(xv, "linear");
  require_matrix(wv, "linear");
  if (xv.cols() != wv.rows()) {
    throw DimensionError("linear: inner extents disagree for " + shape_string(xv.shape()) +
                         " x " + shape_string(wv.shape()));
  }
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  require_vector(b.value(), n, "linear");
  Tensor out({m, n});
  const double* bias = b.value().raw();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(bias, bias + n, out.raw() + i * n);
  }
  kernels::matmul_nn(xv.data(), wv.data(), out.data(), m, k, n, true);
  return tape.record("linear", std::move(out), {x, w, b},
                     [x, w, b, m, k, n](Tape& t, const Tensor& g) {
                       if (t.requires_grad(x)) {
                         kernels::matmul_nt(g.data(), w.value().data(), t.grad(x).data(),
                                            m, n, k, true);
                       }
                       if (t.requires_grad(w)) {
                         kernels::matmul_tn(x.value().data(), g.data(), t.grad(w).data(),
                                            m, k, n, true);
                       }
                       if (t.requires_grad(b)) {
                         double* db = t.grad(b).raw();
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
                         }
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(out, b.value());
  return tape.record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad(a), g);
    if (t.requires_grad(b)) add_into(t.grad(b), g);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape({a, b});
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& da = t.grad(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tape& tape = same_tape({x});
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return tape.record("scale", std::move(out), {x}, [x, factor](Tape& t, const Tensor& g) {
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
  });
}

Var sum(Var x) {
  Tape& tape = same_tape({x});
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return tape.record("sum", Tensor::scalar(total), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& dx = t.grad(x);
    for (double& v : dx.data()) v += g[0];
  });
}

Var gelu(Var x) {
  Tape& tape = same_tape({x});
  Tensor out(x.value().shape());
  kernels::gelu_forward(x.value().data(), out.data());
  return tape.record("gelu", std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    kernels::gelu_backward(x.value().data(), g.data(), t.grad(x).data());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& tape = same_tape({x, gamma, beta});
  const Tensor& xv = x.value();
  require_matrix(xv, "layer_norm");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require_vector(gamma.value(), cols, "layer_norm");
  require_vector(beta.value(), cols, "layer_norm");
  Tensor out({rows, cols});
  Tensor xhat({rows, cols});
  Tensor rstd({rows});
  kernels::layer_norm_forward(xv.data(), gamma.value().data(), beta.value().data(),
                              out.data(), xhat.data(), rstd.data(), rows, cols, eps);
  if (!tape.recording()) return tape.record("layer_norm", std::move(out), {x, gamma, beta}, {});
  return tape.record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, rows, cols, xhat = std::move(xhat), rstd = std::move(rstd)](
          Tape& t, const Tensor& g) {
        std::span<double> dx, dg, db;
        if (t.requires_grad(x)) dx = t.grad(x).data();
        if (t.requires_grad(gamma)) dg = t.grad(gamma).data();
        if (t.requires_grad(beta)) db = t.grad(beta).data();
        kernels::layer_norm_backward(g.data(), xhat.data(), rstd.data(),
                                     gamma.value().data(), dx, dg, db, rows, cols);
      });
}

Var embedding(Var table, std::span<const ClassId> ids, double factor) {
  Tape& tape = same_tape({table});
  const Tensor& tv = table.value();
  require_matrix(tv, "embedding");
  if (ids.empty()) throw DimensionError("embedding: empty id sequence");
  const std::size_t vocab = tv.rows(), dim = tv.cols();
  Tensor out({ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " out of range for " +
                       std::to_string(vocab) + " rows");
    }
    for (std::size_t c = 0; c < dim; ++c) out.at(i, c) = tv.at(ids[i], c) * factor;
  }
  std::vector<ClassId> saved(ids.begin(), ids.end());
  return tape.record("embedding", std::move(out), {table},
                     [table, dim, factor, saved = std::move(saved)](Tape& t, const Tensor& g) {
                       Tensor& dt = t.grad(table);
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         for (std::size_t c = 0; c < dim; ++c) {
                           dt.at(saved[i], c) += g[i * dim + c] * factor;
                         }
                       }
                     });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& tape = same_tape({x});
  const Tensor& xv = x.value();
  require_matrix(xv, "gather_rows");
  if (rows.empty()) throw DimensionError("gather_rows: empty row list");
  const std::size_t cols = xv.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw IndexError("gather_rows: row index out of range");
    std::copy_n(xv.raw() + rows[i] * cols, cols, out.raw() + i * cols);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return tape.record("gather_rows", std::move(out), {x},
                     [x, cols, saved = std::move(saved)](Tape& t, const Tensor& g) {
                       Tensor& dx = t.grad(x);
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           dx[saved[i] * cols + c] += g[i * cols + c];
                         }
                       }
                     });
}

Var attention(Var q, Var k, Var v, const AttentionSpec& spec) {
  Tape& tape = same_tape({q, k, v});
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  require_matrix(qv, "attention");
  require_matrix(kv, "attention");
  require_same_shape(kv, vv, "attention");
  const std::size_t d = qv.cols();
  if (kv.cols() != d) throw DimensionError("attention: query and key widths differ");
  if (spec.heads == 0 || d % spec.heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(spec.heads));
  }
  if (spec.q_offsets.size() < 2 || spec.q_offsets.size() != spec.kv_offsets.size() ||
      spec.q_offsets.front() != 0 || spec.kv_offsets.front() != 0 ||
      spec.q_offsets.back() != qv.rows() || spec.kv_offsets.back() != kv.rows()) {
    throw DimensionError("attention: segment offsets do not cover the operands");
  }
  for (std::size_t s = 0; s + 1 < spec.q_offsets.size(); ++s) {
    const std::size_t lq = spec.q_offsets[s + 1] - spec.q_offsets[s];
    const std::size_t lk = spec.kv_offsets[s + 1] - spec.kv_offsets[s];
    if (spec.q_offsets[s + 1] <= spec.q_offsets[s] ||
        spec.kv_offsets[s + 1] <= spec.kv_offsets[s]) {
      throw DimensionError("attention: empty or decreasing segment");
    }
    if (spec.causal && lq != lk) {
      throw DimensionError("attention: causal segments need equal query/key lengths");
    }
  }

  auto layout_spec = std::make_shared<AttentionSpec>(spec);
  kernels::AttentionLayout layout{layout_spec->q_offsets, layout_spec->kv_offsets,
                                  spec.heads, d / spec.heads, spec.causal};
  Tensor out({qv.rows(), d});
  std::vector<double> probs(layout.prob_size());
  kernels::attention_forward(qv.data(), kv.data(), vv.data(), out.data(), probs, layout);
  if (!tape.recording()) return tape.record("attention", std::move(out), {q, k, v}, {});
  return tape.record(
      "attention", std::move(out), {q, k, v},
      [q, k, v, layout_spec, layout, probs = std::move(probs)](Tape& t, const Tensor& g) {
        std::span<double> dq, dk, dv;
        if (t.requires_grad(q)) dq = t.grad(q).data();
        if (t.requires_grad(k)) dk = t.grad(k).data();
        if (t.requires_grad(v)) dv = t.grad(v).data();
        kernels::attention_backward(q.value().data(), k.value().data(), v.value().data(),
                                    probs, g.data(), dq, dk, dv, layout);
      });
}

namespace {

Var cross_entropy_impl(const char* op, Var logits, std::span<const ClassId> targets,
                       std::vector<double> weights) {
  Tape& tape = same_tape({logits});
  const Tensor& lv = logits.value();
  require_matrix(lv, op);
  const std::size_t rows = lv.rows(), vocab = lv.cols();
  if (targets.size() != rows) {
    throw DimensionError(std::string(op) + ": " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  for (ClassId target : targets) {
    if (target >= vocab) {
      throw IndexError(std::string(op) + ": target id " + std::to_string(target) +
                       " out of range for " + std::to_string(vocab) + " classes");
    }
  }
  Tensor probs = lv;
  kernels::softmax_rows(probs.data(), rows, vocab);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    // log-sum-exp form keeps extreme logits exact.
    const double* row = lv.raw() + r * vocab;
    double mx = row[0];
    for (std::size_t c = 1; c < vocab; ++c) mx = std::max(mx, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) s += std::exp(row[c] - mx);
    loss += weights[r] * (mx + std::log(s) - row[targets[r]]);
  }
  std::vector<ClassId> saved(targets.begin(), targets.end());
  return tape.record(op, Tensor::scalar(loss), {logits},
                     [logits, rows, vocab, probs = std::move(probs), saved = std::move(saved),
                      weights = std::move(weights)](Tape& t, const Tensor& g) {
                       Tensor& dl = t.grad(logits);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double w = g[0] * weights[r];
                         for (std::size_t c = 0; c < vocab; ++c) {
                           dl[r * vocab + c] += w * probs[r * vocab + c];
                         }
                         dl[r * vocab + saved[r]] -= w;
                       }
                     });
}

}  // namespace

Var softmax_cross_entropy(Var logits, std::span<const ClassId> targets) {
  if (targets.empty()) throw ContractError("softmax_cross_entropy: empty batch");
  std::vector<double> weights(targets.size(), 1.0 / static_cast<double>(targets.size()));
  return cross_entropy_impl("softmax_cross_entropy", logits, targets, std::move(weights));
}

Var weighted_cross_entropy(Var logits, std::span<const ClassId> targets,
                           std::span<const double> weights) {
  if (targets.empty()) throw ContractError("weighted_cross_entropy: empty batch");
  if (weights.size() != targets.size()) {
    throw DimensionError("weighted_cross_entropy: one weight per target required");
  }
  return cross_entropy_impl("weighted_cross_entropy", logits, targets,
                            std::vector<double>(weights.begin(), weights.end()));
}

Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  kernels::softmax_rows(out.data(), out.rows(), out.cols());
  return out;
}

}  // namespace r2d::tensor
