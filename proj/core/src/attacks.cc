#include "remark/attacks.h"

#include <memory>

#include "remark/error.h"

namespace remark {

const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kDelete:
      return "delete";
    case AttackKind::kAdd:
      return "add";
    case AttackKind::kReplace:
      return "replace";
    case AttackKind::kRephrase:
      return "rephrase";
    case AttackKind::kRewatermark:
      return "rewatermark";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (auto k : {AttackKind::kDelete, AttackKind::kAdd, AttackKind::kReplace,
                 AttackKind::kRephrase, AttackKind::kRewatermark}) {
    if (name == attack_name(k)) return k;
  }
  throw Error("unknown attack \"" + std::string(name) + "\"");
}

void AttackConfig::validate() const {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("attack rate must lie in [0, 1)");
  if (!(acceptor_floor > 0.0 && acceptor_floor <= 1.0)) {
    throw Error("acceptor floor must lie in (0, 1]");
  }
}

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("attack rate must lie in [0, 1)");
}

}  // namespace

TokenSequence attack_delete(const TokenSequence& tokens, double rate,
                            Rng& rng) {
  check_rate(rate);
  TokenSequence out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (!rng.bernoulli(rate)) out.push_back(t);
  }
  if (out.empty() && !tokens.empty()) {
    out.push_back(tokens[rng.index(tokens.size())]);
  }
  return out;
}

TokenSequence attack_add(const TokenSequence& tokens, double rate, Rng& rng,
                         const Vocabulary& vocab) {
  check_rate(rate);
  const std::size_t regular = vocab.size() - Vocabulary::kNumReserved;
  if (regular == 0) throw Error("vocabulary has no regular tokens");
  TokenSequence out;
  out.reserve(tokens.size() * 2);
  for (TokenId t : tokens) {
    out.push_back(t);
    if (rng.bernoulli(rate)) {
      out.push_back(static_cast<TokenId>(Vocabulary::kNumReserved +
                                         rng.index(regular)));
    }
  }
  return out;
}

TokenSequence attack_replace(const TokenSequence& tokens, double rate,
                             Rng& rng, const SynonymTable& synonyms,
                             const Vocabulary& vocab) {
  check_rate(rate);
  TokenSequence out = tokens;
  for (auto& t : out) {
    if (!vocab.valid(t) || vocab.is_reserved(t)) continue;
    const auto* ns = synonyms.neighbors(vocab.token(t));
    if (!ns) continue;
    TokenId replacement = -1;
    for (const auto& n : *ns) {
      if (vocab.contains(n)) {
        replacement = vocab.id(n);
        break;
      }
    }
    if (replacement < 0) continue;
    if (rng.bernoulli(rate)) t = replacement;
  }
  return out;
}

RephraseOutcome attack_rephrase(std::string_view text,
                                const Paraphraser& paraphraser,
                                const SemanticScorer& scorer, double floor) {
  if (!paraphraser) throw Error("no paraphraser supplied");
  if (!scorer) throw Error("no semantic scorer supplied");
  if (!(floor > 0.0 && floor <= 1.0)) {
    throw Error("acceptor floor must lie in (0, 1]");
  }
  RephraseOutcome out;
  std::string candidate;
  try {
    candidate = paraphraser(text);
  } catch (const std::exception&) {
    out.text = std::string(text);
    out.paraphraser_failed = true;
    return out;
  }
  out.score = scorer(text, candidate);
  out.accepted = out.score >= floor;
  out.text = out.accepted ? std::move(candidate) : std::string(text);
  return out;
}

Paraphraser rule_based_paraphraser(SynonymTable synonyms, std::uint64_t seed,
                                   double swap_rate, double synonym_rate) {
  auto table = std::make_shared<const SynonymTable>(std::move(synonyms));
  auto rng = std::make_shared<Rng>(seed);
  return [table, rng, swap_rate, synonym_rate](std::string_view text) {
    auto words = split_words(text);
    const auto original = words;
    for (auto& w : words) {
      const auto* ns = table->neighbors(w);
      if (ns && !ns->empty() && rng->bernoulli(synonym_rate)) w = ns->front();
    }
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      if (rng->bernoulli(swap_rate)) {
        std::swap(words[i], words[i + 1]);
        ++i;
      }
    }
    if (words == original) {
      std::vector<std::size_t> pairs;
      for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        if (words[i] != words[i + 1]) pairs.push_back(i);
      }
      if (!pairs.empty()) {
        const auto i = pairs[rng->index(pairs.size())];
        std::swap(words[i], words[i + 1]);
      }
    }
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  };
}

TokenSequence attack_rewatermark(const TokenSequence& tokens,
                                 const WatermarkModel& adversary,
                                 const BitMessage& message,
                                 const InsertionConfig& config, Rng& rng) {
  if (config.iterations == 0) return tokens;
  return watermark(adversary, tokens, message, config, rng).tokens;
}

std::string attack_rewatermark_text(std::string_view text,
                                    const WatermarkModel& adversary,
                                    const Vocabulary& adversary_vocab,
                                    const BitMessage& message,
                                    const InsertionConfig& config, Rng& rng) {
  if (config.iterations == 0) return std::string(text);
  const auto tokens = tokenize(text, adversary_vocab,
                               static_cast<std::size_t>(
                                   adversary.config().max_tokens));
  return detokenize(attack_rewatermark(tokens, adversary, message, config, rng),
                    adversary_vocab);
}

}  // namespace remark
