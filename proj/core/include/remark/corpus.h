#ifndef REMARK_CORPUS_H_
#define REMARK_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "remark/rng.h"

namespace remark {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;
// 1 = keep the token, 0 = masked.
using MaskSequence = std::vector<std::uint8_t>;

// Word-level vocabulary with four reserved ids at the front.
//
// Ids are dense in [0, size()). Surface strings of non-reserved tokens map
// bijectively onto ids >= kNumReserved.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnknown = 1;
  static constexpr TokenId kBegin = 2;
  static constexpr TokenId kEnd = 3;
  static constexpr std::size_t kNumReserved = 4;

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}
  // `tokens` are the non-reserved surface strings in id order.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Keeps the max_size - 4 most frequent whitespace tokens; frequency ties
  // break lexicographically. Throws "empty corpus" when no token is found.
  static Vocabulary build(std::span<const std::string> texts,
                          std::size_t max_size);

  std::size_t size() const { return surface_.size(); }
  // Unknown id for out-of-vocabulary strings.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool is_reserved(TokenId id) const {
    return id >= 0 && id < static_cast<TokenId>(kNumReserved);
  }
  bool valid(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < size();
  }
  // Non-reserved tokens in id order.
  std::vector<std::string> regular_tokens() const;

  // Plain-text format: a "# "-prefixed header block terminated by a line
  // holding a single "#", then one token per line (line k is id k + 4).
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  std::string serialize() const;
  static Vocabulary parse(std::string_view contents);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.surface_ == b.surface_;
  }

 private:
  std::vector<std::string> surface_;
  std::unordered_map<std::string, TokenId> index_;
};

// Splits on ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);

// Whitespace tokenization; OOV words map to kUnknown; truncates to max_len.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       std::size_t max_len);

// Space-joined surface strings with reserved ids dropped. Throws
// "invalid token id" for ids outside the vocabulary.
std::string detokenize(std::span<const TokenId> seq, const Vocabulary& vocab);

// Each position is independently 0 with probability mask_pct.
MaskSequence sample_mask(std::size_t length, double mask_pct, Rng& rng);

// Masked positions become the pad id.
TokenSequence apply_mask(std::span<const TokenId> seq,
                         std::span<const std::uint8_t> mask);

struct Corpus {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Seeded shuffle, then the first round(train_fraction * n) records train.
Corpus split_corpus(std::vector<std::string> records, double train_fraction,
                    std::uint64_t seed);

// JSONL with a required "text" string per line; unknown fields are ignored
// and blank lines skipped.
std::vector<std::string> load_jsonl_texts(const std::filesystem::path& path);
std::vector<std::string> parse_jsonl_texts(std::string_view contents);

// Deterministic toy corpus: `count` sentences of exactly `length` words
// drawn from a small template grammar (199 word types, Zipf-weighted).
std::vector<std::string> generate_synthetic_corpus(std::size_t count,
                                                   std::size_t length,
                                                   std::uint64_t seed);

}  // namespace remark

#endif  // REMARK_CORPUS_H_
