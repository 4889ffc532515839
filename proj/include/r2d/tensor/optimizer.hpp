#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "r2d/tensor/tape.hpp"
#include "r2d/tensor/tensor.hpp"

namespace r2d::tensor {

/// Named learnable tensors in insertion order.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  Tensor& add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.entries_.size() == b.entries_.size() &&
           std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(),
                      [](const Entry& x, const Entry& y) {
                        return x.name == y.name && x.value == y.value;
                      });
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct OptimizerState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// Fresh state with zeroed moments shaped like `params`.
OptimizerState make_optimizer_state(const ParameterSet& params, const AdamWConfig& config);

/// One AdamW update: bias-corrected adaptive step from the gradients, then
/// decoupled decay p <- p * (1 - lr * weight_decay) applied to the parameter.
/// Validates every gradient before touching any parameter.
void optimizer_step(ParameterSet& params, const Gradients& grads, OptimizerState& state);

double global_grad_norm(const Gradients& grads);
/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

}  // namespace r2d::tensor
