#include <algorithm>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "remark/attacks.h"
#include "remark/error.h"
#include "test_util.h"

namespace remark {
namespace {

TokenSequence long_sequence(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  TokenSequence t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(4 + static_cast<TokenId>(rng.index(20)));
  return t;
}

Vocabulary word_vocab() {
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  return Vocabulary(words);
}

TEST(AttackNames, ParseRoundTrip) {
  for (auto k : {AttackKind::kDelete, AttackKind::kAdd, AttackKind::kReplace,
                 AttackKind::kRephrase, AttackKind::kRewatermark}) {
    EXPECT_EQ(parse_attack_kind(attack_name(k)), k);
  }
  EXPECT_THROW(parse_attack_kind("shuffle"), Error);
}

TEST(Delete, ZeroRateIsIdentity) {
  Rng rng(1);
  const auto t = long_sequence(50, 1);
  EXPECT_EQ(attack_delete(t, 0.0, rng), t);
}

TEST(Delete, RemovalsWithinBinomialBound) {
  Rng rng(2);
  const auto t = long_sequence(1000, 2);
  const auto removed = t.size() - attack_delete(t, 0.06, rng).size();
  EXPECT_GE(removed, 37u);
  EXPECT_LE(removed, 87u);
}

TEST(Delete, SingleTokenSurvives) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    EXPECT_EQ(attack_delete({9}, 0.99, rng), (TokenSequence{9}));
  }
  Rng rng(3);
  EXPECT_THROW(attack_delete({9}, 1.0, rng), Error);
}

TEST(Add, ZeroRateIsIdentity) {
  Rng rng(1);
  const auto t = long_sequence(50, 1);
  EXPECT_EQ(attack_add(t, 0.0, rng, word_vocab()), t);
}

TEST(Add, LengthWithinBoundAndNoReservedIds) {
  Rng rng(4);
  const auto t = long_sequence(1000, 4);
  const auto out = attack_add(t, 0.06, rng, word_vocab());
  EXPECT_GE(out.size(), 1037u);
  EXPECT_LE(out.size(), 1087u);
  EXPECT_TRUE(std::all_of(out.begin(), out.end(), [](TokenId id) {
    return id >= static_cast<TokenId>(Vocabulary::kNumReserved) && id < 24;
  }));
}

SynonymTable partial_table() {
  SynonymTable table;
  table.set("w0", {"w1", "w2"});
  table.set("w3", {"missing", "w4"});
  table.set("w5", {"missing"});
  return table;
}

TEST(Replace, ZeroRateIsIdentity) {
  Rng rng(1);
  const auto t = long_sequence(50, 1);
  EXPECT_EQ(attack_replace(t, 0.0, rng, partial_table(), word_vocab()), t);
}

TEST(Replace, TokensWithoutNeighborsNeverChange) {
  const auto vocab = word_vocab();
  const auto table = partial_table();
  const auto t = long_sequence(500, 6);
  Rng rng(6);
  const auto out = attack_replace(t, 0.9, rng, table, vocab);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& w = vocab.token(t[i]);
    if (w != "w0" && w != "w3") EXPECT_EQ(out[i], t[i]);
  }
}

TEST(Replace, PositionsMatchReplayedStream) {
  const auto vocab = word_vocab();
  const auto table = partial_table();
  const auto t = long_sequence(300, 7);
  Rng rng(70);
  const auto out = attack_replace(t, 0.4, rng, table, vocab);

  // Replay: one draw per token with an in-vocabulary neighbor.
  Rng replay(70);
  std::set<std::size_t> expected;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& w = vocab.token(t[i]);
    if (w == "w0" || w == "w3") {
      if (replay.uniform() < 0.4) expected.insert(i);
    }
  }
  std::set<std::size_t> actual;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (out[i] != t[i]) actual.insert(i);
  }
  EXPECT_EQ(actual, expected);
  EXPECT_FALSE(expected.empty());
  for (auto i : actual) {
    const auto& w = vocab.token(t[i]);
    EXPECT_EQ(vocab.token(out[i]), w == "w0" ? "w1" : "w4");
  }
}

double overlap_scorer(std::string_view a, std::string_view b) {
  const auto wa = split_words(a), wb = split_words(b);
  if (wa == wb) return 1.0;
  std::multiset<std::string> sa(wa.begin(), wa.end());
  std::size_t common = 0;
  for (const auto& w : wb) {
    auto it = sa.find(w);
    if (it != sa.end()) {
      ++common;
      sa.erase(it);
    }
  }
  return static_cast<double>(common) / static_cast<double>(std::max(wa.size(), wb.size()));
}

TEST(Rephrase, IdentityParaphraserAccepted) {
  const auto r = attack_rephrase(
      "a b c", [](std::string_view s) { return std::string(s); }, overlap_scorer, 0.85);
  EXPECT_EQ(r.text, "a b c");
  EXPECT_EQ(r.score, 1.0);
  EXPECT_TRUE(r.accepted);
}

TEST(Rephrase, BelowFloorKeepsOriginal) {
  const auto r = attack_rephrase(
      "a b c d", [](std::string_view) { return std::string("x y z w"); },
      overlap_scorer, 0.85);
  EXPECT_EQ(r.text, "a b c d");
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.score, 0.0);
}

TEST(Rephrase, FailingParaphraserFallsBack) {
  const auto r = attack_rephrase(
      "a b", [](std::string_view) -> std::string { throw std::runtime_error("down"); },
      overlap_scorer, 0.85);
  EXPECT_TRUE(r.paraphraser_failed);
  EXPECT_EQ(r.text, "a b");
}

TEST(Rephrase, DefaultParaphraserChangesFiftyTokenInput) {
  std::string text;
  Rng rng(12);
  for (int i = 0; i < 50; ++i) text += "w" + std::to_string(rng.index(20)) + " ";
  text.pop_back();
  SynonymTable table;
  table.set("w1", {"w2"});
  auto para = rule_based_paraphraser(table, 5);
  const auto candidate = para(text);
  const auto before = split_words(text), after = split_words(candidate);
  ASSERT_EQ(before.size(), after.size());
  EXPECT_NE(before, after);

  for (double floor : {0.5, 0.99}) {
    auto p = rule_based_paraphraser(table, 5);
    const auto r = attack_rephrase(text, p, overlap_scorer, floor);
    EXPECT_EQ(r.accepted, r.score >= floor);
    EXPECT_EQ(r.text, r.accepted ? candidate : text);
  }
}

TEST(Rewatermark, ZeroIterationsIsIdentity) {
  WatermarkModel adversary(testing::micro_config());
  adversary.trained_steps = 1;
  InsertionConfig off;
  off.iterations = 0;
  off.temperatures.clear();
  Rng rng(1);
  const TokenSequence t = {4, 5, 6};
  EXPECT_EQ(attack_rewatermark(t, adversary, BitMessage::parse("1010"), off, rng), t);
  EXPECT_EQ(attack_rewatermark_text("a b", adversary, Vocabulary(), BitMessage::parse("1010"),
                                    off, rng),
            "a b");
}

TEST(Rewatermark, ActiveRunEmitsRegularTokens) {
  WatermarkModel adversary(testing::micro_config());
  adversary.trained_steps = 1;
  Rng rng(2);
  const auto out = attack_rewatermark({4, 5, 6, 7}, adversary, BitMessage::parse("0110"),
                                      InsertionConfig{}, rng);
  EXPECT_EQ(out.size(), 4u);
  for (TokenId id : out) EXPECT_GE(id, 4);
}

}  // namespace
}  // namespace remark
