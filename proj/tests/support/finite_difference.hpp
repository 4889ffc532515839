#pragma once

// Central finite differences over every scalar of a ParameterSet. Used as the
// independent oracle for reverse-mode gradients; it only evaluates the loss
// closure and never looks at the tape's gradient rules.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "r2d/tensor/optimizer.hpp"

namespace r2d::testing {

using LossFn = std::function<double(const tensor::ParameterSet&)>;

inline tensor::Gradients numeric_gradients(tensor::ParameterSet params, const LossFn& loss,
                                           double h = 1e-5) {
  tensor::Gradients out;
  for (auto& entry : params.entries()) {
    tensor::Tensor g(entry.value.shape());
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value[i];
      entry.value[i] = saved + h;
      const double up = loss(params);
      entry.value[i] = saved - h;
      const double down = loss(params);
      entry.value[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.emplace(entry.name, std::move(g));
  }
  return out;
}

struct GradientComparison {
  double max_relative_error = 0.0;  // worst tensor, inf-norm relative
  std::string worst_tensor;
};

/// Per tensor: max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, floor).
/// The floor keeps tensors whose true gradient is identically zero (e.g. an
/// attention key bias, which softmax cancels) from dividing noise by noise.
inline GradientComparison compare_gradients(const tensor::Gradients& analytic,
                                            const tensor::Gradients& numeric,
                                            double floor = 1e-6) {
  GradientComparison result;
  for (const auto& [name, n] : numeric) {
    const tensor::Tensor& a = analytic.at(name);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      diff = std::max(diff, std::abs(a[i] - n[i]));
      scale = std::max({scale, std::abs(a[i]), std::abs(n[i])});
    }
    const double rel = diff / std::max(scale, floor);
    if (rel >= result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_tensor = name;
    }
  }
  return result;
}

}  // namespace r2d::testing
