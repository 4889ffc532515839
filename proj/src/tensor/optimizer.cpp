#include "r2d/tensor/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "r2d/errors.hpp"

namespace r2d::tensor {

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw IndexError("unknown parameter " + std::string(name));
  return entries_[it->second].value;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IndexError("unknown parameter " + std::string(name));
  return entries_[it->second].value;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

OptimizerState make_optimizer_state(const ParameterSet& params, const AdamWConfig& config) {
  OptimizerState state;
  state.config = config;
  for (const auto& e : params.entries()) {
    state.first_moment.emplace(e.name, Tensor::zeros_like(e.value));
    state.second_moment.emplace(e.name, Tensor::zeros_like(e.value));
  }
  return state;
}

void optimizer_step(ParameterSet& params, const Gradients& grads, OptimizerState& state) {
  for (const auto& e : params.entries()) {
    auto g = grads.find(e.name);
    if (g == grads.end()) throw ContractError("no gradient for parameter " + e.name);
    if (g->second.shape() != e.value.shape()) {
      throw DimensionError("gradient for " + e.name + " has shape " +
                           shape_string(g->second.shape()) + ", parameter has " +
                           shape_string(e.value.shape()));
    }
    if (!g->second.all_finite()) {
      throw NumericError("non-finite gradient for parameter " + e.name);
    }
    auto m = state.first_moment.find(e.name);
    auto v = state.second_moment.find(e.name);
    if (m == state.first_moment.end() || v == state.second_moment.end() ||
        m->second.shape() != e.value.shape() || v->second.shape() != e.value.shape()) {
      throw DimensionError("optimizer moments do not match parameter " + e.name);
    }
  }

  const AdamWConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - c.lr * c.weight_decay;

  for (auto& e : params.entries()) {
    const Tensor& g = grads.at(e.name);
    Tensor& m = state.first_moment.at(e.name);
    Tensor& v = state.second_moment.at(e.name);
    double* p = e.value.raw();
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
      p[i] *= decay;
    }
  }
}

double global_grad_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.data()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = global_grad_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& v : g.data()) v *= factor;
    }
  }
  return norm;
}

}  // namespace r2d::tensor
