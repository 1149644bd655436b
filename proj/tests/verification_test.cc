#include <cmath>

#include <gtest/gtest.h>

#include "json.hpp"
#include "remark/error.h"
#include "remark/verification.h"
#include "test_util.h"

namespace remark {
namespace {

BitMessage with_matches(const BitMessage& m, std::size_t matches) {
  auto bits = m.bits();
  for (std::size_t i = matches; i < bits.size(); ++i) bits[i] ^= 1;
  return BitMessage(bits);
}

TEST(Wer, IdenticalAndComplement) {
  const auto m = BitMessage::parse("1100101");
  EXPECT_EQ(wer(m, m), 1.0);
  EXPECT_EQ(wer(m, m.complement()), 0.0);
  EXPECT_THROW(wer(m, BitMessage::parse("1")), Error);
}

TEST(Wer, RandomPairsAverageHalf) {
  Rng rng(8);
  double total = 0.0;
  for (int i = 0; i < 10000; ++i) {
    total += wer(BitMessage::random(64, rng), BitMessage::random(64, rng));
  }
  EXPECT_NEAR(total / 10000, 0.5, 0.01);
}

TEST(ZScore, ExactValues) {
  EXPECT_EQ(z_score(16, 16), 4.0);
  EXPECT_EQ(z_score(64, 32), 0.0);
  EXPECT_EQ(z_score(64, 64), 8.0);
  EXPECT_THROW(z_score(0, 0), Error);
  EXPECT_THROW(z_score(4, 5), Error);
}

TEST(ZScore, SixtyFourBitReferencePoint) {
  // A 64-bit mean z of 7.12 corresponds to recovering 94.5% of the bits.
  EXPECT_NEAR(z_score_from_rate(64, 0.945), 7.12, 1e-9);
  EXPECT_NEAR(z_score_from_rate(16, 1.0), z_score(16, 16), 1e-12);
}

TEST(PValue, AtThresholdFour) {
  const double p = one_sided_p(4.0);
  EXPECT_GE(p, 2.9e-5);
  EXPECT_LE(p, 3.3e-5);
  EXPECT_NEAR(one_sided_p(0.0), 0.5, 1e-15);
  EXPECT_NEAR(one_sided_p(1.64), 0.0505, 1e-3);
}

TEST(Report, BoundaryAtExactlyFour) {
  const auto m = BitMessage::parse("1011001110001011");
  const auto r = make_report(m, m, 4.0);
  EXPECT_EQ(r.matches, 16u);
  EXPECT_EQ(r.z, 4.0);
  EXPECT_TRUE(r.watermarked);
  EXPECT_FALSE(make_report(m, with_matches(m, 15), 4.0).watermarked);
}

TEST(Report, LowerThresholdFlipsVerdict) {
  const auto m = BitMessage::parse("1011001110001011");
  const auto extracted = with_matches(m, 12);
  const auto strict = make_report(m, extracted, 4.0);
  EXPECT_EQ(strict.z, 2.0);
  EXPECT_FALSE(strict.watermarked);
  EXPECT_TRUE(make_report(m, extracted, 1.64).watermarked);
}

TEST(Report, JsonFields) {
  const auto m = BitMessage::parse("1010");
  const auto j = nlohmann::json::parse(report_to_json(make_report(m, m, 1.0)));
  EXPECT_EQ(j["expected"], "1010");
  EXPECT_EQ(j["extracted"], "1010");
  EXPECT_EQ(j["matches"], 4);
  EXPECT_EQ(j["bits"], 4);
  EXPECT_EQ(j["wer"], 1.0);
  EXPECT_EQ(j["z"], 2.0);
  EXPECT_EQ(j["verdict"], "watermarked");
}

TEST(Verify, SingleTokenStillYieldsAllBits) {
  const WatermarkModel model(testing::micro_config(12, 4));
  const auto r = verify(model, {7}, BitMessage::parse("0000"));
  EXPECT_EQ(r.extracted.size(), 4u);
  EXPECT_THROW(verify(model, {7}, BitMessage::parse("00")), Error);
}

TEST(Verify, UntrainedModelIsNearChance) {
  ModelConfig cfg = testing::micro_config(40, 16);
  const WatermarkModel model(cfg);
  Rng rng(21);
  double total = 0.0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    TokenSequence t;
    for (int j = 0; j < 10; ++j) t.push_back(4 + static_cast<TokenId>(rng.index(36)));
    total += verify(model, t, BitMessage::random(16, rng)).wer;
  }
  EXPECT_NEAR(total / trials, 0.5, 0.05);
}

}  // namespace
}  // namespace remark
