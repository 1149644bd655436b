#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "remark/corpus.h"
#include "remark/error.h"
#include "remark/rng.h"
#include "remark/training.h"
#include "test_util.h"

namespace remark {
namespace {

DistributionSequence one_hot_rows(const TokenSequence& tokens, int vocab) {
  DistributionSequence d =
      DistributionSequence::Zero(static_cast<nn::Index>(tokens.size()), vocab);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    d(static_cast<nn::Index>(i), tokens[i]) = 1.0f;
  }
  return d;
}

TEST(SemanticLoss, OneHotIsZero) {
  const TokenSequence t = {4, 7, 5};
  EXPECT_NEAR(semantic_loss(t, one_hot_rows(t, 10)), 0.0, 1e-6);
}

TEST(SemanticLoss, UniformIsLogVocab) {
  const TokenSequence t = {4, 100, 199, 12};
  const DistributionSequence d = DistributionSequence::Constant(4, 200, 1.0f / 200);
  EXPECT_NEAR(semantic_loss(t, d), std::log(200.0), 1e-6);
  EXPECT_NEAR(std::log(200.0), 5.2983, 1e-4);
}

TEST(SemanticLoss, HalfProbabilityIsLogTwo) {
  const TokenSequence t = {0, 1, 2};
  DistributionSequence d = DistributionSequence::Constant(3, 3, 0.25f);
  for (int i = 0; i < 3; ++i) d(i, i) = 0.5f;
  EXPECT_NEAR(semantic_loss(t, d), std::log(2.0), 1e-6);
}

TEST(SemanticLoss, BadInputs) {
  const DistributionSequence d = DistributionSequence::Constant(2, 3, 1.0f / 3);
  EXPECT_THROW(semantic_loss(TokenSequence{0}, d), Error);
  EXPECT_THROW(semantic_loss(TokenSequence{0, 3}, d), Error);
}

TEST(MessageLoss, WorkedExamples) {
  const auto m = BitMessage::parse("10110010");
  std::vector<double> exact(m.bits().begin(), m.bits().end());
  std::vector<double> flipped;
  for (auto b : m.bits()) flipped.push_back(1.0 - b);
  EXPECT_EQ(message_loss(m, exact, exact, 0.7, 0.3), 0.0);
  EXPECT_NEAR(message_loss(m, flipped, exact, 0.7, 0.3), 5.6, 1e-12);

  auto two_off = exact;
  two_off[0] = 1.0 - two_off[0];
  two_off[5] = 1.0 - two_off[5];
  EXPECT_EQ(message_loss(m, flipped, two_off, 0.0, 1.0), 2.0);
  EXPECT_THROW(message_loss(m, {1.0}, exact, 0.5, 0.5), Error);
}

TEST(TotalLoss, ClosedForms) {
  EXPECT_EQ(total_loss(0.0, 0.0, 0.3, 0.9), 0.0);
  EXPECT_EQ(total_loss(2.0, 3.0, 0.5, 0.5), 2.5);
  EXPECT_EQ(total_loss(1.75, 9.0, 1.0, 0.0), 1.75);
}

TEST(TotalLoss, LinearInBothLosses) {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const double s1 = rng.uniform() * 5, s2 = rng.uniform() * 5;
    const double m1 = rng.uniform() * 5, m2 = rng.uniform() * 5;
    const double a = rng.uniform() * 3 - 1;
    const double lhs = total_loss(s1 + a * s2, m1 + a * m2, 0.5, 0.5);
    const double rhs =
        total_loss(s1, m1, 0.5, 0.5) + a * total_loss(s2, m2, 0.5, 0.5);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(TrainConfig, ParseDefaultsAndOverrides) {
  const auto c = parse_train_config(R"({"epochs": 3, "transform_mix": [1, 0, 0]})");
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.learning_rate, 3e-5);
  EXPECT_EQ(c.transform_mix[0], 1.0);
  EXPECT_EQ(parse_train_config(train_config_to_json(c)).epochs, 3);
  EXPECT_THROW(parse_train_config(R"({"epoch": 3})"), Error);
  EXPECT_THROW(parse_train_config(R"({"optimizer": "sgd"})"), Error);
  EXPECT_THROW(parse_train_config(R"({"transform_mix": [0.5, 0.1, 0.1]})"), Error);
  EXPECT_THROW(parse_train_config("[1]"), Error);
}

TEST(RunConfig, SharesMaxTokensAndSeed) {
  const auto r = parse_run_config(
      R"({"seed": 4, "max_tokens": 20, "message_bits": 4, "d_model": 32,
          "vocab_max_size": 200})");
  EXPECT_EQ(r.model.max_tokens, 20);
  EXPECT_EQ(r.model.seed, 4u);
  EXPECT_EQ(r.model.message_bits, 4);
  EXPECT_EQ(r.vocab_max_size, 200);
  EXPECT_EQ(parse_run_config(R"({"seed": 4, "model_seed": 8})").model.seed, 8u);
  EXPECT_THROW(parse_run_config(R"({"bogus": 1})"), Error);
}

TEST(LossTrace, Header) {
  const auto csv = loss_trace_csv({{1, 2.0, 1.0, 1.5, 0.5}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,L_S,L_M,total,heldout_wer");
}

TEST(AdamW, FirstStepMovesBySignedLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps), plus decay.
  nn::Tensor<double> w(nn::Matrix<double>::Constant(1, 2, 1.0), true);
  AdamW<double> opt({{"w", w}}, 0.1, 0.0);
  w.grad_buffer() = nn::Matrix<double>(1, 2);
  w.grad_buffer() << 2.0, -0.5;
  opt.step();
  EXPECT_NEAR(w.value()(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(w.value()(0, 1), 1.1, 1e-7);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamW, DecoupledDecay) {
  nn::Tensor<double> w(nn::Matrix<double>::Constant(1, 1, 2.0), true);
  AdamW<double> opt({{"w", w}}, 0.1, 0.5);
  w.grad_buffer() = nn::Matrix<double>::Zero(1, 1);
  opt.step();
  EXPECT_NEAR(w.value()(0, 0), 2.0 * (1.0 - 0.1 * 0.5), 1e-12);
}

std::vector<TokenSequence> tiny_split(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSequence t;
    for (int j = 0; j < 6; ++j) t.push_back(4 + static_cast<TokenId>(rng.index(8)));
    out.push_back(t);
  }
  return out;
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const WatermarkModel init(testing::micro_config());
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 4;
  cfg.max_tokens = 16;
  const auto result = train_tokens(init, tiny_split(8, 1), tiny_split(4, 2), cfg);
  const auto before = init.parameters();
  const auto after = result.model.parameters();
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_TRUE(before[i].tensor.value() == after[i].tensor.value()) << before[i].name;
  }
  EXPECT_EQ(result.model.trained_steps, 2);
  EXPECT_EQ(result.records.size(), 1u);
}

TEST(Train, InputModelUntouchedAndDeterministic) {
  const WatermarkModel init(testing::micro_config());
  const auto snapshot = init.clone();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 4;
  cfg.max_tokens = 16;
  cfg.seed = 5;
  const auto a = train_tokens(init, tiny_split(8, 1), tiny_split(4, 2), cfg);
  const auto b = train_tokens(init, tiny_split(8, 1), tiny_split(4, 2), cfg);
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  const auto p0 = init.parameters(), ps = snapshot.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(pa[i].tensor.value() == pb[i].tensor.value());
    EXPECT_TRUE(p0[i].tensor.value() == ps[i].tensor.value());
  }
  EXPECT_EQ(a.records.size(), 2u);
  EXPECT_EQ(a.records.back().semantic_loss, b.records.back().semantic_loss);
}

TEST(Train, LossesFallOnTinyProblem) {
  const WatermarkModel init(testing::micro_config());
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 8;
  cfg.max_tokens = 16;
  cfg.eval_every = 30;
  const auto r = train_tokens(init, tiny_split(32, 1), tiny_split(8, 2), cfg);
  EXPECT_LT(r.records.back().semantic_loss, r.records.front().semantic_loss);
  EXPECT_LT(r.records.back().message_loss, r.records.front().message_loss);
  EXPECT_TRUE(std::isnan(r.records.front().heldout_wer));
  EXPECT_FALSE(std::isnan(r.records.back().heldout_wer));
}

TEST(Train, RejectsEmptySplit) {
  const WatermarkModel init(testing::micro_config());
  EXPECT_THROW(train_tokens(init, {}, tiny_split(2, 1), TrainConfig{}), Error);
}

}  // namespace
}  // namespace remark
