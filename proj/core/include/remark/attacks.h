#ifndef REMARK_ATTACKS_H_
#define REMARK_ATTACKS_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "remark/corpus.h"
#include "remark/insertion.h"
#include "remark/message.h"
#include "remark/model.h"
#include "remark/rng.h"
#include "remark/word_vectors.h"

namespace remark {

enum class AttackKind { kDelete, kAdd, kReplace, kRephrase, kRewatermark };

const char* attack_name(AttackKind kind);
// Throws Error for an unknown name.
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::kDelete;
  double rate = 0.06;
  double acceptor_floor = 0.85;
  std::uint64_t seed = 0;

  void validate() const;
};

// Every token is dropped independently with probability `rate`. If all of
// them go, one uniformly chosen token is kept.
TokenSequence attack_delete(const TokenSequence& tokens, double rate, Rng& rng);

// After each position a uniformly random non-reserved token is inserted with
// probability `rate`.
TokenSequence attack_add(const TokenSequence& tokens, double rate, Rng& rng,
                         const Vocabulary& vocab);

// Each token whose surface word has a neighbor in `vocab` is swapped for the
// first such neighbor with probability `rate`. One uniform draw is consumed
// per eligible token and none for the others.
TokenSequence attack_replace(const TokenSequence& tokens, double rate,
                             Rng& rng, const SynonymTable& synonyms,
                             const Vocabulary& vocab);

using Paraphraser = std::function<std::string(std::string_view)>;

struct RephraseOutcome {
  std::string text;
  double score = 1.0;
  bool accepted = false;
  bool paraphraser_failed = false;
};

// Keeps the paraphrase iff scorer(text, paraphrase) >= floor.
RephraseOutcome attack_rephrase(std::string_view text,
                                const Paraphraser& paraphraser,
                                const SemanticScorer& scorer, double floor);

// Seeded word-level rewriter: swaps adjacent words with probability
// `swap_rate` and substitutes table synonyms with probability
// `synonym_rate`. Inputs with two or more distinct words always change.
Paraphraser rule_based_paraphraser(SynonymTable synonyms, std::uint64_t seed,
                                   double swap_rate = 0.15,
                                   double synonym_rate = 0.15);

// Re-inserts `message` with the adversary's model. Zero iterations is a
// no-op.
TokenSequence attack_rewatermark(const TokenSequence& tokens,
                                 const WatermarkModel& adversary,
                                 const BitMessage& message,
                                 const InsertionConfig& config, Rng& rng);

// Same on raw text when the adversary uses its own vocabulary.
std::string attack_rewatermark_text(std::string_view text,
                                    const WatermarkModel& adversary,
                                    const Vocabulary& adversary_vocab,
                                    const BitMessage& message,
                                    const InsertionConfig& config, Rng& rng);

}  // namespace remark

#endif  // REMARK_ATTACKS_H_
