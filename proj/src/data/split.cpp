#include "r2d/data/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

#include "r2d/errors.hpp"
#include "r2d/tensor/rng.hpp"

namespace r2d::data {

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainders(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - std::floor(quota);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    if (weights[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  while (assigned > total) {  // floating-point quotas can overshoot by one
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  return counts;
}

namespace {

/// Integer max-flow on a small dense graph (DFS augmenting paths).
class FlowGraph {
 public:
  explicit FlowGraph(std::size_t nodes) : adj_(nodes) {}

  void add_edge(std::size_t from, std::size_t to, std::size_t cap) {
    adj_[from].push_back(edges_.size());
    edges_.push_back({to, cap});
    adj_[to].push_back(edges_.size());
    edges_.push_back({from, 0});
  }

  std::size_t max_flow(std::size_t source, std::size_t sink) {
    std::size_t total = 0;
    for (;;) {
      std::vector<bool> seen(adj_.size(), false);
      if (!push(source, sink, seen)) return total;
      ++total;
    }
  }

  /// Flow on the k-th edge added with add_edge.
  std::size_t flow(std::size_t k) const { return edges_[2 * k + 1].cap; }

 private:
  struct Edge {
    std::size_t to;
    std::size_t cap;
  };

  bool push(std::size_t u, std::size_t sink, std::vector<bool>& seen) {
    if (u == sink) return true;
    seen[u] = true;
    for (std::size_t e : adj_[u]) {
      if (edges_[e].cap == 0 || seen[edges_[e].to]) continue;
      if (push(edges_[e].to, sink, seen)) {
        --edges_[e].cap;
        ++edges_[e ^ 1].cap;
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
};

/// Rounds a label x part quota table so every cell is the floor or ceiling of
/// its quota, each row sums to its label total and each column sums to the
/// part's largest-remainder total. Floors are fixed; the leftover units are
/// routed through cells with a fractional quota, larger fractions first.
std::vector<std::array<std::size_t, 3>> controlled_rounding(const std::vector<std::array<double, 3>>& quotas,
                                                            const std::vector<std::size_t>& label_totals,
                                                            const std::vector<std::size_t>& part_totals) {
  const std::size_t labels = quotas.size();
  const std::size_t source = labels + 3, sink = labels + 4;
  std::vector<std::array<std::size_t, 3>> counts(labels);
  std::array<std::size_t, 3> floor_total{};
  FlowGraph g(labels + 5);
  std::vector<std::array<std::ptrdiff_t, 3>> edge_of(labels, {-1, -1, -1});
  std::size_t edge_count = 0;
  std::size_t need = 0;
  for (std::size_t l = 0; l < labels; ++l) {
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      counts[l][p] = static_cast<std::size_t>(std::floor(quotas[l][p]));
      assigned += counts[l][p];
      floor_total[p] += counts[l][p];
    }
    g.add_edge(source, l, label_totals[l] - assigned);
    ++edge_count;
    need += label_totals[l] - assigned;
    std::array<int, 3> order{0, 1, 2};
    auto frac = [&](int p) { return quotas[l][p] - std::floor(quotas[l][p]); };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac(a) > frac(b); });
    for (int p : order) {
      if (frac(p) <= 0.0) continue;
      g.add_edge(l, labels + static_cast<std::size_t>(p), 1);
      edge_of[l][p] = static_cast<std::ptrdiff_t>(edge_count++);
    }
  }
  for (int p = 0; p < 3; ++p) {
    g.add_edge(labels + static_cast<std::size_t>(p), sink, part_totals[p] - std::min(part_totals[p], floor_total[p]));
    ++edge_count;
  }
  if (g.max_flow(source, sink) != need) throw std::logic_error("stratified_split: rounding infeasible");
  for (std::size_t l = 0; l < labels; ++l) {
    for (int p = 0; p < 3; ++p) {
      if (edge_of[l][p] >= 0) counts[l][p] += g.flow(static_cast<std::size_t>(edge_of[l][p]));
    }
  }
  return counts;
}

}  // namespace

Splits stratified_split(std::span<const Example> examples, const SplitFractions& fractions,
                        std::uint64_t seed) {
  const std::array<double, 3> weights{fractions.train, fractions.val, fractions.test};
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(weights[0] + weights[1] + weights[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const auto nonempty_parts =
      static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < examples.size(); ++i) by_label[examples[i].gold_label].push_back(i);

  std::vector<std::array<double, 3>> quotas;
  std::vector<std::size_t> label_totals;
  for (const auto& [label, indices] : by_label) {
    if (indices.size() < nonempty_parts) {
      spdlog::warn("label '{}' has {} examples for {} split parts; some parts get none", label,
                   indices.size(), nonempty_parts);
    }
    const double n = static_cast<double>(indices.size());
    quotas.push_back({weights[0] * n, weights[1] * n, weights[2] * n});
    label_totals.push_back(indices.size());
  }
  const auto part_totals = largest_remainder(examples.size(), weights);
  const auto counts = controlled_rounding(quotas, label_totals, part_totals);

  tensor::Rng rng(seed);
  std::vector<int> part_of(examples.size(), -1);
  std::size_t l = 0;
  for (auto& [label, indices] : by_label) {
    for (std::size_t i = indices.size(); i > 1; --i) std::swap(indices[i - 1], indices[rng.below(i)]);
    std::size_t cursor = 0;
    for (int part = 0; part < 3; ++part) {
      for (std::size_t k = 0; k < counts[l][part]; ++k) part_of[indices[cursor++]] = part;
    }
    ++l;
  }

  Splits out;
  std::array<std::vector<Example>*, 3> parts{&out.train, &out.val, &out.test};
  for (std::size_t i = 0; i < examples.size(); ++i) parts[part_of[i]]->push_back(examples[i]);
  return out;
}

}  // namespace r2d::data
