#include <cstring>
#include <string>

#include <gtest/gtest.h>

#include "remark/checkpoint.h"
#include "remark/error.h"
#include "test_util.h"

namespace remark {
namespace {

Vocabulary eight_words() {
  return Vocabulary({"a", "b", "c", "d", "e", "f", "g", "h"});
}

void expect_same_parameters(const WatermarkModel& a, const WatermarkModel& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(pa[i].tensor.value() == pb[i].tensor.value()) << pa[i].name;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  WatermarkModel m(testing::micro_config());
  m.trained_steps = 42;
  const auto vocab = eight_words();
  const auto bytes = serialize_checkpoint(m, &vocab);
  EXPECT_EQ(bytes.substr(0, 8), "RMKCKPT1");
  const auto ck = parse_checkpoint(bytes);
  EXPECT_EQ(ck.model.config(), m.config());
  EXPECT_EQ(ck.model.trained_steps, 42);
  ASSERT_TRUE(ck.vocab.has_value());
  EXPECT_EQ(*ck.vocab, vocab);
  expect_same_parameters(ck.model, m);
  EXPECT_EQ(serialize_checkpoint(ck.model, &*ck.vocab), bytes);
}

TEST(Checkpoint, FileRoundTripWithoutVocabulary) {
  const WatermarkModel m(testing::micro_config());
  testing::TempDir dir("ckpt");
  save_checkpoint(dir.file("m.ckpt"), m);
  const auto ck = load_checkpoint(dir.file("m.ckpt"));
  EXPECT_FALSE(ck.vocab.has_value());
  expect_same_parameters(ck.model, m);
}

TEST(Checkpoint, ForeignAndFutureFilesAreIncompatible) {
  EXPECT_THROW(parse_checkpoint("hello world, not a model"), IncompatibleArtifact);
  const WatermarkModel m(testing::micro_config());
  auto bytes = serialize_checkpoint(m);
  const auto pos = bytes.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, 11, "\"version\":9");
  EXPECT_THROW(parse_checkpoint(bytes), IncompatibleArtifact);
}

TEST(Checkpoint, TruncationIsAnError) {
  const WatermarkModel m(testing::micro_config());
  const auto bytes = serialize_checkpoint(m);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, 12)), Error);
}

TEST(Checkpoint, VocabularyMustMatchModel) {
  const WatermarkModel m(testing::micro_config());
  const Vocabulary small({"a"});
  EXPECT_THROW(serialize_checkpoint(m, &small), Error);
}

TEST(ModelConfigJson, RoundTrip) {
  auto c = testing::micro_config();
  c.embedding_init_std = 0.7;
  c.seed = 123456789012345ULL;
  EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
  EXPECT_THROW(model_config_from_json("{"), Error);
  EXPECT_THROW(model_config_from_json("{}"), Error);
}

}  // namespace
}  // namespace remark
