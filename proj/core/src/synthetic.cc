#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "remark/corpus.h"
#include "remark/error.h"

namespace remark {
namespace {

struct WordClass {
  char tag;
  std::vector<std::string_view> words;
};

const std::vector<WordClass>& word_classes() {
  static const std::vector<WordClass> classes = {
      {'D', {"the", "a", "this", "that", "every", "some", "one", "each"}},
      {'A', {"quick", "small", "large", "bright", "quiet", "old", "young",
             "green", "cold", "warm", "heavy", "light", "strange", "simple",
             "careful", "happy", "tired", "famous", "hidden", "open",
             "narrow", "wide", "early", "late", "gentle", "rough", "clever",
             "silent", "busy", "empty", "golden", "distant", "modern",
             "ancient", "friendly"}},
      {'N', {"model", "river", "city", "garden", "teacher", "student",
             "machine", "letter", "window", "market", "forest", "engine",
             "report", "village", "doctor", "system", "story", "bridge",
             "signal", "network", "mountain", "table", "painter", "question",
             "answer", "train", "island", "museum", "library", "kitchen",
             "planet", "farmer", "writer", "journey", "harbor", "tower",
             "valley", "camera", "engineer", "child", "office", "school",
             "ocean", "road", "song", "theory", "record", "window_seat",
             "desert", "method", "message", "reader", "signal_tower",
             "lantern", "meadow", "harvest", "canvas", "compass", "orchard",
             "ladder"}},
      {'V', {"sees", "builds", "finds", "carries", "follows", "writes",
             "reads", "moves", "opens", "crosses", "watches", "paints",
             "studies", "repairs", "visits", "describes", "measures",
             "explains", "leaves", "reaches", "holds", "sends", "shapes",
             "guides", "protects", "drives", "changes", "shows", "keeps",
             "covers", "joins", "lifts", "tests", "answers", "greets",
             "counts", "teaches", "gathers", "mends", "draws"}},
      {'R', {"quickly", "slowly", "often", "rarely", "quietly", "carefully",
             "again", "today", "soon", "already", "gladly", "barely",
             "easily", "always", "never", "openly", "early", "together",
             "nearly", "still"}},
      {'P', {"near", "under", "across", "behind", "beyond", "inside",
             "along", "through", "toward", "beside", "around", "above",
             "below", "within", "past"}},
      {'C', {"and", "but", "while", "because", "although"}},
      {'M', {"anna", "boris", "chen", "dara", "elif", "farid", "greta",
             "hugo", "ines", "jonas", "kira", "lena", "marco", "nadia",
             "omar"}},
      {',', {","}},
      {'.', {"."}},
  };
  return classes;
}

// Slot templates; every template expands to exactly 20 words.
constexpr std::array<std::string_view, 6> kTemplates = {
    "DANVPDN,CMVDANRPDAN.",
    "MRVDANPDNCDANVDNPMR.",
    "DNVDANRCMVPDANPDNRA.",
    "DANPDNVMR,CDAVDNPDN.",
    "MVDNPDANCDANRVPDNRM.",
    "DANRVDN,CMVPDANRPDN.",
};

const WordClass& class_for(char tag) {
  for (const auto& c : word_classes()) {
    if (c.tag == tag) return c;
  }
  throw Error(std::string("unknown slot tag ") + tag);
}

std::string_view draw_word(const WordClass& cls, Rng& rng) {
  // Zipf-like weights 1 / (rank + 1).
  double total = 0.0;
  for (std::size_t r = 0; r < cls.words.size(); ++r) total += 1.0 / (r + 1.0);
  double u = rng.uniform() * total;
  for (std::size_t r = 0; r < cls.words.size(); ++r) {
    u -= 1.0 / (r + 1.0);
    if (u < 0.0) return cls.words[r];
  }
  return cls.words.back();
}

}  // namespace

std::vector<std::string> generate_synthetic_corpus(std::size_t count,
                                                   std::size_t length,
                                                   std::uint64_t seed) {
  if (length == 0) throw Error("synthetic sentence length must be positive");
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string sentence;
    std::size_t words = 0;
    // Concatenate templates until the requested length is reached.
    while (words < length) {
      const auto tmpl = kTemplates[rng.index(kTemplates.size())];
      for (char tag : tmpl) {
        if (words == length) break;
        if (!sentence.empty()) sentence += ' ';
        sentence += draw_word(class_for(tag), rng);
        ++words;
      }
    }
    out.push_back(std::move(sentence));
  }
  return out;
}

}  // namespace remark
