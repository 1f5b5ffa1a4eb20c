#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rlid/error.hpp"
#include "rlid/train.hpp"

using namespace rlid;
using namespace rlid::train;
using model::ParamKind;
using model::ParameterSet;
using model::Tensor;

namespace {

ParameterSet<float> scalar(float value, ParamKind kind = ParamKind::kMatrix) {
  ParameterSet<float> p;
  p.push_back(Tensor<float>{"w", {1}, kind, {value}});
  return p;
}

TrainConfig adam_config(double lr, double decay) {
  TrainConfig c;
  c.learning_rate = lr;
  c.weight_decay = decay;
  return c;
}

// Plain Adam on one coordinate, written independently in double.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g, double lr, double b1, double b2, double eps) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

model::ModelConfig toy_config(std::size_t vocab_size) {
  model::ModelConfig c;
  c.vocab_size = vocab_size;
  c.hidden_dim = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_dim = 16;
  c.max_len = 12;
  c.n_classes = 3;
  c.dropout_rate = 0.0;
  return c;
}

corpus::DatasetSplit toy_split(std::size_t n_train, std::size_t n_val) {
  const auto labels = LabelSet::defaults();
  const std::vector<std::string> stems{"hello there", "kaise ho", "privet kak"};
  corpus::DatasetSplit s;
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    corpus::LabeledSentence p{stems[i % 3] + std::string(1 + i % 2, "xyz"[i % 3]), labels[i % 3]};
    (i < n_train ? s.train : s.validation).push_back(p);
  }
  return s;
}

tokenizer::Vocabulary toy_vocab(const corpus::DatasetSplit& s) {
  std::vector<std::string> texts;
  for (const auto& p : s.train) texts.push_back(p.text);
  return tokenizer::build_vocab(texts, 64);
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("single scalar step without decay") {
    auto p = scalar(1.0f);
    OptimizerState state;
    adamw_step(p, scalar(1.0f), state, adam_config(1e-3, 0.0));
    CHECK(std::abs(p[0].data[0] - 0.9990) < 1e-6);
    CHECK(std::abs(p[0].data[0] - (1.0 - 1e-3 / (1.0 + 1e-8))) < 1e-6);
    CHECK(state.step == 1);
    CHECK(state.m[0].data[0] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(state.v[0].data[0] == doctest::Approx(0.001).epsilon(1e-6));
  }

  TEST_CASE("single scalar step with decoupled decay") {
    auto p = scalar(1.0f);
    OptimizerState state;
    adamw_step(p, scalar(1.0f), state, adam_config(1e-3, 0.01));
    CHECK(std::abs(p[0].data[0] - 0.99899) < 1e-6);
  }

  TEST_CASE("zero gradient without decay is a fixed point") {
    std::mt19937 gen(3);
    std::normal_distribution<float> normal;
    ParameterSet<float> p, g;
    p.push_back(Tensor<float>{"a", {2, 3}, ParamKind::kMatrix, std::vector<float>(6)});
    p.push_back(Tensor<float>{"b", {3}, ParamKind::kBias, std::vector<float>(3)});
    for (auto& t : p) for (auto& x : t.data) x = normal(gen);
    for (const auto& t : p) g.push_back({t.name, t.shape, t.kind, std::vector<float>(t.size(), 0.0f)});
    const auto before = p;
    OptimizerState state;
    for (int i = 0; i < 3; ++i) adamw_step(p, g, state, adam_config(1e-3, 0.0));
    CHECK(p == before);
  }

  TEST_CASE("decay skips biases and norm parameters") {
    for (const auto kind : {ParamKind::kBias, ParamKind::kNormScale, ParamKind::kNormShift}) {
      auto decayed = scalar(1.0f, kind);
      auto plain = scalar(1.0f, kind);
      OptimizerState s1, s2;
      adamw_step(decayed, scalar(0.5f, kind), s1, adam_config(1e-3, 0.5));
      adamw_step(plain, scalar(0.5f, kind), s2, adam_config(1e-3, 0.0));
      CHECK(decayed == plain);
    }
    auto decayed = scalar(1.0f);
    auto plain = scalar(1.0f);
    OptimizerState s1, s2;
    adamw_step(decayed, scalar(0.5f), s1, adam_config(1e-3, 0.5));
    adamw_step(plain, scalar(0.5f), s2, adam_config(1e-3, 0.0));
    CHECK(decayed[0].data[0] < plain[0].data[0]);
  }

  TEST_CASE("without decay the update is plain Adam") {
    std::mt19937 gen(21);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 50; ++trial) {
      const double lr = 1e-4 * (1 + gen() % 100);
      double theta = normal(gen);
      auto p = scalar(static_cast<float>(theta));
      OptimizerState state;
      ScalarAdam ref;
      for (int step = 0; step < 5; ++step) {
        const float g = static_cast<float>(normal(gen) * std::pow(10.0, static_cast<int>(gen() % 5) - 2));
        adamw_step(p, scalar(g), state, adam_config(lr, 0.0));
        theta = ref.step(theta, g, lr, 0.9, 0.999, 1e-8);
        CHECK(p[0].data[0] == doctest::Approx(theta).epsilon(1e-5).scale(1.0));
        theta = p[0].data[0];  // follow the stored float value
      }
    }
  }

  TEST_CASE("after one step from zero state the corrected moment is the gradient") {
    std::mt19937 gen(5);
    std::normal_distribution<float> normal;
    for (int trial = 0; trial < 100; ++trial) {
      const float g = normal(gen) * 3.0f;
      auto p = scalar(0.0f);
      OptimizerState state;
      const TrainConfig c = adam_config(1e-3, 0.0);
      adamw_step(p, scalar(g), state, c);
      const double m_hat = state.m[0].data[0] / (1.0 - c.beta1);
      CHECK(m_hat == doctest::Approx(g).epsilon(1e-6));
    }
  }

  TEST_CASE("non-finite gradients abort and name the parameter") {
    for (const float bad : {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity()}) {
      ParameterSet<float> p, g;
      p.push_back(Tensor<float>{"layers.0.ffn.in.weight", {2}, ParamKind::kMatrix, {1.0f, 2.0f}});
      g.push_back(Tensor<float>{"layers.0.ffn.in.weight", {2}, ParamKind::kMatrix, {0.1f, bad}});
      const auto before = p;
      OptimizerState state;
      try {
        adamw_step(p, g, state, adam_config(1e-3, 0.0));
        FAIL("expected an error");
      } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layers.0.ffn.in.weight") != std::string::npos);
      }
      CHECK(p == before);
    }
  }

  TEST_CASE("shape mismatch") {
    auto p = scalar(1.0f);
    ParameterSet<float> g;
    g.push_back(Tensor<float>{"w", {2}, ParamKind::kMatrix, {0.0f, 0.0f}});
    OptimizerState state;
    CHECK_THROWS_AS(adamw_step(p, g, state, adam_config(1e-3, 0.0)), DataError);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = TrainConfig{};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
  }

  TEST_CASE("argmax prefers the lowest index on ties") {
    CHECK(argmax(std::vector<float>{1.0f, 3.0f, 3.0f}) == 1);
    CHECK(argmax(std::vector<double>{2.0, 2.0, 2.0}) == 0);
    CHECK(argmax(std::vector<double>{-1.0, -0.5}) == 1);
  }

  TEST_CASE("one example and one epoch take exactly one step") {
    const auto split = toy_split(1, 0);
    const auto vocab = toy_vocab(split);
    const auto c = toy_config(vocab.size());
    TrainConfig tc;
    tc.epochs = 1;
    const auto init = model::init_parameters(c, 1);
    const auto r = train::train(init, c, tc, split, vocab);
    CHECK(r.history.total_steps == 1);
    REQUIRE(r.history.epochs.size() == 1);
    CHECK(r.history.epochs[0].steps == 1);
    CHECK_FALSE(r.history.epochs[0].has_validation);
    CHECK_FALSE(r.params == init);
  }

  TEST_CASE("2400 examples in batches of 4 take 600 steps per epoch") {
    const auto split = toy_split(2400, 6);
    const auto vocab = toy_vocab(split);
    auto c = toy_config(vocab.size());
    c.hidden_dim = 2;
    c.n_heads = 1;
    c.ff_dim = 2;
    TrainConfig tc;
    std::vector<std::size_t> seen;
    const auto r = train::train(model::init_parameters(c, 1), c, tc, split, vocab,
                         [&](const EpochRecord& e) { seen.push_back(e.epoch); });
    CHECK(r.history.total_steps == 3000);
    for (const auto& e : r.history.epochs) CHECK(e.steps == 600);
    CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4, 5});
  }

  TEST_CASE("a short final batch is kept") {
    const auto split = toy_split(10, 0);
    const auto vocab = toy_vocab(split);
    const auto c = toy_config(vocab.size());
    TrainConfig tc;
    tc.epochs = 2;
    const auto r = train::train(model::init_parameters(c, 1), c, tc, split, vocab);
    CHECK(r.history.epochs[0].steps == 3);
    CHECK(r.history.total_steps == 6);
  }

  TEST_CASE("loss on a small toy set decreases") {
    const auto split = toy_split(10, 3);
    const auto vocab = toy_vocab(split);
    const auto c = toy_config(vocab.size());
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.batch_size = 2;
    const auto r = train::train(model::init_parameters(c, 3), c, tc, split, vocab);
    REQUIRE(r.history.epochs.size() == 5);
    CHECK(r.history.epochs[4].mean_loss < r.history.epochs[0].mean_loss);
    CHECK(r.history.epochs[4].has_validation);
  }

  TEST_CASE("training is deterministic and follows the seed") {
    const auto split = toy_split(20, 4);
    const auto vocab = toy_vocab(split);
    auto c = toy_config(vocab.size());
    c.dropout_rate = 0.1;
    TrainConfig tc;
    tc.epochs = 2;
    const auto init = model::init_parameters(c, 1);
    const auto a = train::train(init, c, tc, split, vocab);
    const auto b = train::train(init, c, tc, split, vocab);
    CHECK(a.params == b.params);
    CHECK(a.history.to_json() == b.history.to_json());
    tc.seed = 43;
    CHECK_FALSE(train::train(init, c, tc, split, vocab).params == a.params);
  }

  TEST_CASE("train rejects inconsistent inputs") {
    const auto split = toy_split(4, 0);
    const auto vocab = toy_vocab(split);
    auto c = toy_config(vocab.size());
    const auto init = model::init_parameters(c, 1);
    CHECK_THROWS_AS(train::train(init, c, TrainConfig{}, corpus::DatasetSplit{}, vocab), DataError);
    auto wrong = c;
    wrong.vocab_size += 1;
    CHECK_THROWS_AS(train::train(model::init_parameters(wrong, 1), wrong, TrainConfig{}, split, vocab), DataError);
    wrong = c;
    wrong.hidden_dim = 4;
    CHECK_THROWS_AS(train::train(init, wrong, TrainConfig{}, split, vocab), DataError);

    TrainConfig explode;
    explode.learning_rate = 1e30;
    explode.epochs = 3;
    CHECK_THROWS_AS(train::train(init, c, explode, split, vocab), NumericError);
  }

  TEST_CASE("history json") {
    TrainHistory h;
    h.epochs.push_back({1, 10, 0.5, 0.9, true});
    h.epochs.push_back({2, 10, 0.4, 0.0, false});
    h.total_steps = 20;
    const auto j = h.to_json();
    CHECK(j.at("total_steps") == 20);
    CHECK(j.at("epochs")[0].at("validation_accuracy") == 0.9);
    CHECK_FALSE(j.at("epochs")[1].contains("validation_accuracy"));
  }
}
