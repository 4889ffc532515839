#pragma once

// Reference metric implementations written independently of the library:
// n-grams are joined strings counted by linear scans, and F1 comes from an
// explicit confusion matrix.

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace r2d::testing {

inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline std::vector<std::string> joined_ngrams(const std::vector<std::string>& w, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < n; ++k) g += w[i + k] + "\x1f";
    out.push_back(g);
  }
  return out;
}

/// Sentences are pre-tokenized with single spaces and no punctuation.
inline double oracle_bleu(const std::vector<std::string>& cands, const std::vector<std::string>& refs) {
  double c = 0, r = 0;
  double logp = 0;
  std::vector<double> m(5, 0), t(5, 0);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto cw = words(cands[i]);
    const auto rw = words(refs[i]);
    c += static_cast<double>(cw.size());
    r += static_cast<double>(rw.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cg = joined_ngrams(cw, n);
      const auto rg = joined_ngrams(rw, n);
      t[n] += static_cast<double>(cg.size());
      const std::set<std::string> distinct(cg.begin(), cg.end());
      for (const auto& g : distinct) {
        const auto in_c = std::count(cg.begin(), cg.end(), g);
        const auto in_r = std::count(rg.begin(), rg.end(), g);
        m[n] += static_cast<double>(std::min(in_c, in_r));
      }
    }
  }
  if (c == 0) return 0.0;
  for (std::size_t n = 1; n <= 4; ++n) logp += 0.25 * std::log(m[n] == 0 ? 1.0 / (t[n] + 1) : m[n] / t[n]);
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(logp);
}

/// Macro-F1 from a full confusion matrix over integer classes 0..k-1, where
/// class k (if it occurs in preds) is the invalid bucket.
inline double oracle_macro_f1(const std::vector<int>& preds, const std::vector<int>& golds, int k) {
  std::vector<std::vector<int>> cm(k + 1, std::vector<int>(k + 1, 0));  // cm[gold][pred]
  for (std::size_t i = 0; i < preds.size(); ++i) ++cm[golds[i]][preds[i]];
  double sum = 0;
  int included = 0;
  for (int c = 0; c <= k; ++c) {
    int tp = cm[c][c], row = 0, col = 0;
    for (int o = 0; o <= k; ++o) {
      row += cm[c][o];
      col += cm[o][c];
    }
    if (row == 0 && col == 0) continue;
    const double p = col == 0 ? 0.0 : static_cast<double>(tp) / col;
    const double rc = row == 0 ? 0.0 : static_cast<double>(tp) / row;
    sum += (p + rc) == 0 ? 0.0 : 2 * p * rc / (p + rc);
    ++included;
  }
  return sum / included;
}

}  // namespace r2d::testing
