#include "remark/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "remark/error.h"

namespace remark {
namespace {

constexpr const char* kReservedSurface[Vocabulary::kNumReserved] = {
    "<pad>", "<unk>", "<s>", "</s>"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  surface_.reserve(tokens.size() + kNumReserved);
  for (const char* r : kReservedSurface) surface_.emplace_back(r);
  for (auto& t : tokens) {
    if (t.empty()) throw Error("empty token in vocabulary");
    const auto id = static_cast<TokenId>(surface_.size());
    if (!index_.emplace(t, id).second) {
      throw Error("duplicate token in vocabulary: " + t);
    }
    surface_.push_back(std::move(t));
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts,
                             std::size_t max_size) {
  if (max_size <= kNumReserved) {
    throw Error("vocabulary max_size must exceed the 4 reserved ids");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) ++counts[std::move(w)];
  }
  if (counts.empty()) throw Error("empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!valid(id)) throw Error("invalid token id");
  return surface_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {surface_.begin() + kNumReserved, surface_.end()};
}

std::string Vocabulary::serialize() const {
  std::string out;
  out += "# remark vocabulary, one token per line\n";
  out += "# reserved ids: 0=<pad> 1=<unk> 2=<s> 3=</s>; line k below has id k+4\n";
  out += "#\n";
  for (std::size_t i = kNumReserved; i < surface_.size(); ++i) {
    out += surface_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view contents) {
  std::vector<std::string> tokens;
  bool in_header = true;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (in_header) {
      if (line == "#") {
        in_header = false;
      } else if (line.empty() || line.front() != '#') {
        throw Error("vocabulary file: missing '#' header terminator");
      }
      continue;
    }
    if (line.empty()) continue;
    tokens.emplace_back(line);
  }
  if (in_header) throw Error("vocabulary file: missing header");
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       std::size_t max_len) {
  TokenSequence seq;
  for (const auto& w : split_words(text)) {
    if (seq.size() >= max_len) break;
    seq.push_back(vocab.id(w));
  }
  return seq;
}

std::string detokenize(std::span<const TokenId> seq, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : seq) {
    const std::string& surface = vocab.token(id);
    if (vocab.is_reserved(id)) continue;
    if (!out.empty()) out += ' ';
    out += surface;
  }
  return out;
}

MaskSequence sample_mask(std::size_t length, double mask_pct, Rng& rng) {
  if (!(mask_pct >= 0.0 && mask_pct <= 1.0)) {
    throw Error("mask_pct must lie in [0, 1]");
  }
  MaskSequence mask(length);
  for (auto& bit : mask) bit = rng.bernoulli(mask_pct) ? 0 : 1;
  return mask;
}

TokenSequence apply_mask(std::span<const TokenId> seq,
                         std::span<const std::uint8_t> mask) {
  if (seq.size() != mask.size()) throw Error("mask length mismatch");
  TokenSequence out(seq.begin(), seq.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i] == 0) out[i] = Vocabulary::kPad;
  }
  return out;
}

Corpus split_corpus(std::vector<std::string> records, double train_fraction,
                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("train fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  for (std::size_t i = records.size(); i > 1; --i) {
    std::swap(records[i - 1], records[rng.index(i)]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(records.size())));
  Corpus corpus;
  corpus.train.assign(std::make_move_iterator(records.begin()),
                      std::make_move_iterator(records.begin() + n_train));
  corpus.test.assign(std::make_move_iterator(records.begin() + n_train),
                     std::make_move_iterator(records.end()));
  return corpus;
}

std::vector<std::string> parse_jsonl_texts(std::string_view contents) {
  std::vector<std::string> texts;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
      throw Error("corpus line " + std::to_string(line_no) +
                  ": missing \"text\" string field");
    }
    texts.push_back(obj["text"].get<std::string>());
  }
  return texts;
}

std::vector<std::string> load_jsonl_texts(const std::filesystem::path& path) {
  return parse_jsonl_texts(read_file(path));
}

}  // namespace remark
