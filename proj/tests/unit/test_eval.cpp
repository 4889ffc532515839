#include <cmath>
#include <map>

#include "doctest.h"
#include "r2d/data/grammar.hpp"
#include "r2d/errors.hpp"
#include "r2d/eval/metrics.hpp"
#include "r2d/eval/report.hpp"
#include "r2d/tensor/rng.hpp"
#include "support/metric_oracles.hpp"

using namespace r2d;
using namespace r2d::eval;
using Strings = std::vector<std::string>;

namespace {

std::string random_sentence(tensor::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  std::string s;
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    if (!s.empty()) s += ' ';
    s += "w" + std::to_string(rng.below(vocab));
  }
  return s;
}

}  // namespace

TEST_CASE("accuracy") {
  const Strings a{"x", "y", "z"};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(Strings{"p", "q", "r"}, a) == 0.0);
  const Strings golds{"a", "a", "a", "a", "a", "b", "b", "b", "b", "b"};
  const Strings preds{"a", "A ", "a", "b", "b", "b", "b", "b", "a", "junk"};
  CHECK(accuracy(preds, golds) == 0.6);
  const Strings seven{"a", "a", "a", "a", "a", "b", "b", "x", "x", "x"};
  CHECK(accuracy(seven, golds) == 0.7);
  CHECK_THROWS_AS(accuracy(Strings{"a"}, golds), ContractError);
  CHECK_THROWS_AS(accuracy(Strings{}, Strings{}), ContractError);
}

TEST_CASE("accuracy is invariant under joint permutation") {
  tensor::Rng rng(3);
  Strings p, g;
  for (int i = 0; i < 50; ++i) {
    p.push_back("c" + std::to_string(rng.below(4)));
    g.push_back("c" + std::to_string(rng.below(4)));
  }
  const double base = accuracy(p, g);
  for (std::size_t i = p.size(); i > 1; --i) {
    const auto j = rng.below(i);
    std::swap(p[i - 1], p[j]);
    std::swap(g[i - 1], g[j]);
  }
  CHECK(accuracy(p, g) == base);
}

TEST_CASE("macro_f1 binary hand example") {
  // golds A B B B, preds A A B B: A tp1 fp1 fn0 -> P .5 R 1 F 2/3; B tp2 fp0 fn1 -> P 1 R 2/3 F .8
  const auto r = macro_f1(Strings{"A", "A", "B", "B"}, Strings{"A", "B", "B", "B"}, Strings{"A", "B"});
  REQUIRE(r.per_class.size() == 2);
  CHECK(r.per_class[0].precision == 0.5);
  CHECK(r.per_class[0].recall == 1.0);
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class[1].precision == 1.0);
  CHECK(r.per_class[1].recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2).epsilon(1e-15));
}

TEST_CASE("macro_f1 degenerate cases") {
  const Strings golds{"a", "b", "c"};
  CHECK(macro_f1(golds, golds, golds).macro_f1 == 1.0);
  const auto all_invalid = macro_f1(Strings{"?", "??", "zzz"}, golds, golds);
  CHECK(all_invalid.macro_f1 == 0.0);
  CHECK(all_invalid.invalid_predictions == 3);
  REQUIRE(all_invalid.per_class.back().label == kInvalidLabel);
  CHECK(all_invalid.per_class.back().precision == 0.0);
  CHECK(all_invalid.per_class.size() == 4);
  CHECK_THROWS_AS(macro_f1(golds, Strings{"a", "b", "d"}, golds), ContractError);
  // Label-set classes absent from golds and predictions are excluded.
  CHECK(macro_f1(Strings{"a"}, Strings{"a"}, Strings{"a", "b", "c"}).per_class.size() == 1);
}

TEST_CASE("macro_f1 is invariant under relabeling bijections") {
  tensor::Rng rng(11);
  const Strings names{"alpha", "beta", "gamma", "delta"};
  const Strings renamed{"one", "two", "three", "four"};
  Strings p, g, p2, g2;
  for (int i = 0; i < 60; ++i) {
    const auto a = rng.below(4), b = rng.below(4);
    p.push_back(names[a]);
    g.push_back(names[b]);
    p2.push_back(renamed[a]);
    g2.push_back(renamed[b]);
  }
  CHECK(macro_f1(p, g, names).macro_f1 == macro_f1(p2, g2, renamed).macro_f1);
}

TEST_CASE("macro_f1 mean of included per-class F1") {
  tensor::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Strings p, g;
    for (int i = 0; i < 30; ++i) {
      p.push_back("c" + std::to_string(rng.below(6)));
      g.push_back("c" + std::to_string(rng.below(5)));
    }
    const auto r = macro_f1(p, g, Strings{"c0", "c1", "c2", "c3", "c4"});
    double sum = 0;
    for (const auto& c : r.per_class) sum += c.f1;
    CHECK(std::abs(r.macro_f1 - sum / static_cast<double>(r.per_class.size())) <= 1e-12);
  }
}

TEST_CASE("macro_f1 matches confusion-matrix oracle") {
  tensor::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const std::size_t n = 1 + rng.below(60);
    Strings labels;
    for (int c = 0; c < k; ++c) labels.push_back("class " + std::to_string(c));
    std::vector<int> pi, gi;
    Strings p, g;
    for (std::size_t i = 0; i < n; ++i) {
      const int gold = static_cast<int>(rng.below(k));
      const int pred = static_cast<int>(rng.below(k + 1));  // k = invalid
      gi.push_back(gold);
      pi.push_back(pred);
      g.push_back(labels[gold]);
      p.push_back(pred == k ? "garbage " + std::to_string(i) : labels[pred]);
    }
    CHECK(macro_f1(p, g, labels).macro_f1 == r2d::testing::oracle_macro_f1(pi, gi, k));
  }
}

TEST_CASE("bleu basics") {
  const Strings c{"the cat sat on the mat", "a quick brown fox jumps"};
  CHECK(bleu(c, c) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(bleu(Strings{}, Strings{}), ContractError);
  CHECK(bleu(Strings{""}, Strings{"a b"}) == 0.0);

  Strings cand, ref;
  std::string a, b;
  for (int i = 0; i < 30; ++i) {
    a += " a" + std::to_string(i);
    b += " b" + std::to_string(i);
  }
  const double disjoint = bleu(Strings{a}, Strings{b});
  CHECK(disjoint > 0.0);
  CHECK(disjoint < 0.05);
}

TEST_CASE("bleu fixed pair against hand computation") {
  // cand 7 tokens, ref 6; matches 1..4: 4/7, 1/6, 0/5, 0/4; smoothed 1/6 and 1/5
  const std::string cand = "the cat sat on a red mat";
  const std::string ref = "the cat is on the mat";
  const double expected = std::exp(0.25 * (std::log(4.0 / 7) + std::log(1.0 / 6) + std::log(1.0 / 6) +
                                           std::log(1.0 / 5)));
  CHECK(std::abs(bleu(Strings{cand}, Strings{ref}) - expected) <= 1e-12);
  CHECK(std::abs(r2d::testing::oracle_bleu({cand}, {ref}) - expected) <= 1e-12);
}

TEST_CASE("bleu matches brute-force oracle and stays in [0,1]") {
  tensor::Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t pairs = 1 + rng.below(4);
    Strings c, r;
    for (std::size_t i = 0; i < pairs; ++i) {
      c.push_back(random_sentence(rng, 1, 20, 8));
      r.push_back(random_sentence(rng, 1, 20, 8));
    }
    const double got = bleu(c, r);
    CHECK(std::abs(got - r2d::testing::oracle_bleu(c, r)) <= 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
    CHECK(bleu(c, c) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("unigram_overlap_f1") {
  CHECK(unigram_overlap_f1("a b c", "a b c") == 1.0);
  CHECK(unigram_overlap_f1("a b c", "x y z") == 0.0);
  CHECK(unigram_overlap_f1("a b c", "a b d") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(unigram_overlap_f1("A B", "a b") == 1.0);
  CHECK(unigram_overlap_f1("a a a", "a") == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(unigram_overlap_f1("", "a") == 0.0);
}

TEST_CASE("rationale_label_consistency") {
  const std::map<std::string, std::string> markers{
      {"home care", "safe at home"}, {"go to ed now", "needs the emergency department"}};
  CHECK(rationale_label_consistency(Strings{"cough , which is safe at home"}, Strings{"home care"}, markers) == 1.0);
  CHECK(rationale_label_consistency(Strings{"cough , which is safe at home"}, Strings{"go to ed now"}, markers) == 0.0);
  CHECK(rationale_label_consistency(Strings{"safe at home and needs the emergency department"},
                                    Strings{"home care"}, markers) == 0.0);
  CHECK(rationale_label_consistency(Strings{"Safe at HOME."}, Strings{"Home Care"}, markers) == 1.0);
  CHECK_THROWS_AS(rationale_label_consistency(Strings{"x"}, Strings{"unknown"}, markers), ContractError);
  CHECK(rationale_label_consistency(Strings{"x"}, Strings{"unknown"}, markers,
                                    UnknownLabelPolicy::CountInconsistent) == 0.0);

  Strings rationales, labels;
  for (int i = 0; i < 10; ++i) {
    labels.push_back("home care");
    rationales.push_back(i < 7 ? "this is safe at home" : "this needs the emergency department");
  }
  CHECK(rationale_label_consistency(rationales, labels, markers) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("consistency is 1 on generated corpora") {
  const auto g = data::GrammarConfig::defaults();
  Strings rationales, labels;
  for (const auto& ex : data::generate_synthetic(g, 300)) {
    rationales.push_back(ex.gold_rationale);
    labels.push_back(ex.gold_label);
  }
  CHECK(rationale_label_consistency(rationales, labels, g) == 1.0);
}

TEST_CASE("metrics report serialization is stable") {
  Predictions p{{"a", "b", "b"}, {"x y z", "y z", "q"}};
  const Strings golds{"a", "b", "a"};
  const Strings refs{"x y z", "y z w", "q r"};
  const std::map<std::string, std::string> markers{{"a", "z"}, {"b", "w"}};
  const auto r = build_report(p, golds, refs, Strings{"a", "b"}, &markers);
  CHECK(r.examples == 3);
  CHECK(r.consistency.has_value());
  CHECK(r.dump() == build_report(p, golds, refs, Strings{"a", "b"}, &markers).dump());
  const auto j = nlohmann::json::parse(r.dump());
  CHECK(j.at("macro_f1").get<double>() == r.macro_f1);
  CHECK(r.dump().rfind("{\n  \"examples\": 3,\n  \"accuracy\"", 0) == 0);
  CHECK(build_report(p, golds, refs, Strings{"a", "b"}).to_json().at("consistency").is_null());
}
