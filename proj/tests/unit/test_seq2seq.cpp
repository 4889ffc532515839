#include <cmath>
#include <set>

#include "doctest.h"
#include "r2d/errors.hpp"
#include "r2d/seq2seq/decode.hpp"
#include "r2d/seq2seq/model.hpp"
#include "r2d/seq2seq/prompt.hpp"
#include "r2d/seq2seq/vocab.hpp"
#include "support/finite_difference.hpp"

using namespace r2d;
using namespace r2d::seq2seq;

TEST_CASE("format_prompt templates") {
  CHECK(format_prompt(Predict{}, "fever 3 days") == "predict: fever 3 days");
  CHECK(format_prompt(ExplainUnconditioned{}, "x") == "explain: x");
  CHECK(format_prompt(ExplainGivenLabel{"Home Care"}, "x") == "given label: Home Care, explain: x");
  CHECK_THROWS_AS(format_prompt(Predict{}, ""), ContractError);
}

TEST_CASE("format_prompt is injective over kinds and inputs") {
  const std::vector<std::string> inputs{"x", "x y", "explain: x", "predict: x", "a, b"};
  const std::vector<std::string> labels{"home care", "go to ed now", "a", "explain", "label:"};
  std::set<std::string> rendered;
  std::size_t count = 0;
  for (const auto& x : inputs) {
    rendered.insert(format_prompt(Predict{}, x));
    rendered.insert(format_prompt(ExplainUnconditioned{}, x));
    count += 2;
    for (const auto& y : labels) {
      rendered.insert(format_prompt(ExplainGivenLabel{y}, x));
      ++count;
    }
  }
  CHECK(rendered.size() == count);
}

TEST_CASE("tokenize / detokenize") {
  Vocab vocab = Vocab::build(std::vector<std::string>{"the caller reports chest pain , now"});
  SUBCASE("empty") {
    CHECK(vocab.encode("").empty());
    CHECK(vocab.decode(TokenSeq{}).empty());
  }
  SUBCASE("known canonical sentence round-trips") {
    const std::string s = "the caller reports chest pain , now";
    CHECK(vocab.decode(vocab.encode(s)) == s);
  }
  SUBCASE("punctuation splits into its own tokens") {
    CHECK(split_tokens("given label: a b, explain: c") ==
          std::vector<std::string>{"given", "label", ":", "a", "b", ",", "explain", ":", "c"});
  }
  SUBCASE("out-of-vocabulary word maps to UNK") {
    auto ids = vocab.encode("the zebra");
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == vocab.id("the"));
    CHECK(ids[0] != Vocab::kUnk);
    CHECK(ids[1] == Vocab::kUnk);
  }
  SUBCASE("reserved ids are stable") {
    CHECK(vocab.id("<pad>") == Vocab::kPad);
    CHECK(vocab.id("<bos>") == Vocab::kBos);
    CHECK(vocab.id("<eos>") == Vocab::kEos);
    CHECK(vocab.id("<unk>") == Vocab::kUnk);
    CHECK(vocab.id("predict") == Vocab().id("predict"));
  }
  SUBCASE("json round-trip is a bijection") {
    Vocab back = Vocab::from_json(vocab.to_json());
    CHECK(back == vocab);
    for (TokenId i = 0; i < vocab.size(); ++i) CHECK(back.id(vocab.token(i)) == i);
  }
  SUBCASE("json with displaced reserved ids is rejected") {
    auto j = vocab.to_json();
    std::swap(j["<bos>"], j["<eos>"]);
    CHECK_THROWS_AS(Vocab::from_json(j), FormatError);
    auto dup = vocab.to_json();
    dup["now"] = 0;
    CHECK_THROWS_AS(Vocab::from_json(dup), FormatError);
  }
}

namespace {

ModelConfig small_config(std::size_t vocab, std::size_t width = 16, std::size_t layers = 2) {
  return ModelConfig{.encoder_layers = layers,
                     .decoder_layers = layers,
                     .d_model = width,
                     .heads = 4,
                     .d_ff = 4 * width,
                     .max_len = 24,
                     .vocab_size = vocab};
}

// A model whose next token depends only on the current decoder input token:
// attention and feed-forward outputs are zeroed, embeddings are scaled one-hots
// and the output projection encodes the transition table.
ModelParams chain_model(std::size_t vocab, const std::vector<std::pair<TokenId, TokenId>>& next) {
  tensor::Rng rng(1);
  ModelConfig cfg{.encoder_layers = 1, .decoder_layers = 1, .d_model = 16, .heads = 2,
                  .d_ff = 8, .max_len = 16, .vocab_size = vocab};
  ModelParams m = init_model(cfg, rng);
  for (auto& e : m.tensors.entries()) {
    const bool gain = e.name.ends_with(".g");
    e.value.fill(gain ? 1.0 : 0.0);
  }
  auto& emb = m.tensors.at("embed.tokens");
  for (std::size_t t = 0; t < vocab; ++t) emb.at(t, t % 16) = 25.0;
  auto& out = m.tensors.at("out.w");
  for (auto [from, to] : next) out.at(from % 16, to) = 10.0;
  return m;
}

double nll(const ModelParams& m, const TokenSeq& prompt, const TokenSeq& target) {
  tensor::Tape tape(tensor::Tape::Mode::Inference);
  return forward_nll(tape, m, prompt, target).value().item();
}

}  // namespace

TEST_CASE("forward_nll") {
  SUBCASE("forced logits at the gold tokens") {
    auto m = chain_model(14, {{Vocab::kBos, 11}, {11, 13}, {13, Vocab::kEos}});
    CHECK(nll(m, {10, 12}, {11, 13}) < 1e-6);
  }
  SUBCASE("untrained model is close to uniform") {
    tensor::Rng rng(3);
    auto m = init_model(small_config(50), rng);
    const double loss = nll(m, {10, 11, 12, 13, 14}, {20, 21, 22, 23});
    CHECK(std::abs(loss - std::log(50.0)) / std::log(50.0) <= 0.15);
  }
  SUBCASE("target order matters on a trained model") {
    auto m = chain_model(14, {{Vocab::kBos, 11}, {11, 13}, {13, Vocab::kEos}});
    CHECK(nll(m, {10, 12}, {13, 11}) > nll(m, {10, 12}, {11, 13}) + 10.0);

    // A briefly trained model also tells the orders apart.
    tensor::Rng rng(4);
    auto t = init_model(small_config(30), rng);
    auto state = tensor::make_optimizer_state(t.tensors, {.lr = 3e-3});
    const TokenSeq prompt{10, 11, 12}, target{20, 21, 22, 23};
    for (int step = 0; step < 60; ++step) {
      tensor::Tape tape;
      auto loss = forward_nll(tape, t, prompt, target);
      tensor::optimizer_step(t.tensors, tape.backward(loss), state);
    }
    CHECK(nll(t, prompt, {23, 22, 21, 20}) > nll(t, prompt, target) + 1.0);
  }
  SUBCASE("overlong sequences are rejected") {
    tensor::Rng rng(5);
    auto m = init_model(small_config(30), rng);
    CHECK_THROWS_AS(nll(m, TokenSeq(25, 10), {11}), ContractError);
    CHECK_THROWS_AS(nll(m, {10}, TokenSeq(24, 11)), ContractError);
    CHECK_NOTHROW(nll(m, TokenSeq(24, 10), TokenSeq(23, 11)));
  }
  SUBCASE("batched loss is the mean of per-example losses") {
    tensor::Rng rng(6);
    auto m = init_model(small_config(30), rng);
    std::vector<TokenSeq> prompts{{10, 11, 12}, {13, 14}}, targets{{20}, {21, 22, 23}};
    tensor::Tape tape(tensor::Tape::Mode::Inference);
    const double batched = sequence_nll(tape, m, prompts, targets).value().item();
    const double mean = 0.5 * (nll(m, prompts[0], targets[0]) + nll(m, prompts[1], targets[1]));
    CHECK(batched == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("forward_nll gradients match finite differences (2 layers, width 16)") {
  tensor::Rng rng(7);
  auto cfg = small_config(20);
  auto m = init_model(cfg, rng);
  // Perturb the zero-initialised biases and gains so every term is exercised.
  for (auto& e : m.tensors.entries()) {
    if (e.name.ends_with(".b") || e.name.ends_with(".g") || e.name.find(".b") != std::string::npos) {
      for (double& v : e.value.data()) v += 0.1 * (rng.uniform() - 0.5);
    }
  }
  const std::vector<TokenSeq> prompts{{4, 10, 11, 12}, {5, 13, 14}};
  const std::vector<TokenSeq> targets{{15, 16}, {17, 18, 19}};
  tensor::Tape tape;
  auto loss = sequence_nll(tape, m, prompts, targets);
  auto analytic = tape.backward(loss);
  auto numeric = testing::numeric_gradients(m.tensors, [&](const tensor::ParameterSet& p) {
    ModelParams copy{cfg, p};
    tensor::Tape t(tensor::Tape::Mode::Inference);
    return sequence_nll(t, copy, prompts, targets).value().item();
  });
  auto cmp = testing::compare_gradients(analytic, numeric);
  INFO("worst tensor " << cmp.worst_tensor);
  CHECK(cmp.max_relative_error <= 1e-4);
}

TEST_CASE("greedy_decode") {
  SUBCASE("EOS-peaked logits give an empty output") {
    tensor::Rng rng(8);
    auto m = init_model(small_config(30), rng);
    m.tensors.at("out.w").fill(0.0);
    m.tensors.at("out.b")[Vocab::kEos] = 10.0;
    CHECK(greedy_decode(m, {10, 11}, 5).empty());
  }
  SUBCASE("table walk reproduces the forced chain") {
    auto m = chain_model(14, {{Vocab::kBos, 12}, {12, 10}, {10, 13}, {13, Vocab::kEos}});
    CHECK(greedy_decode(m, {11}, 10) == TokenSeq{12, 10, 13});
    CHECK(greedy_decode(m, {11}, 2) == TokenSeq{12, 10});
  }
  SUBCASE("ties break towards the first index") {
    CHECK(argmax_first(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
    tensor::Rng rng(9);
    auto m = init_model(small_config(30), rng);
    m.tensors.at("out.w").fill(0.0);
    m.tensors.at("out.b").fill(0.0);
    m.tensors.at("out.b")[Vocab::kEos] = -1.0;
    // All non-EOS logits tie at zero; <pad> (id 0) is the first.
    CHECK(greedy_decode(m, {10}, 3) == TokenSeq{0, 0, 0});
  }
  SUBCASE("deterministic, and batched equals one-by-one") {
    tensor::Rng rng(10);
    auto m = init_model(small_config(30), rng);
    std::vector<TokenSeq> prompts{{10, 11, 12}, {13}, {14, 15, 16, 17, 18}, {19, 20}};
    auto batch = greedy_decode_batch(m, prompts, 6);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      CHECK(greedy_decode(m, prompts[i], 6) == batch[i]);
      CHECK(greedy_decode(m, prompts[i], 6) == greedy_decode(m, prompts[i], 6));
    }
  }
  SUBCASE("zero max_len is a contract error") {
    auto m = chain_model(14, {});
    CHECK_THROWS_AS(greedy_decode(m, {10}, 0), ContractError);
  }
}
