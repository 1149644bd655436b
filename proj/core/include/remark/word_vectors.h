#ifndef REMARK_WORD_VECTORS_H_
#define REMARK_WORD_VECTORS_H_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace remark {

// Dense word vectors from a positive-PMI co-occurrence matrix reduced by a
// symmetric eigendecomposition.
class WordVectors {
 public:
  struct Options {
    int dimensions = 32;
    int window = 2;
    // Only the most frequent words get vectors.
    std::size_t max_words = 4000;
    std::size_t min_count = 1;
  };

  WordVectors() = default;
  static WordVectors train(std::span<const std::string> texts,
                           const Options& options);

  std::size_t size() const { return words_.size(); }
  int dimensions() const { return static_cast<int>(vectors_.cols()); }
  bool contains(std::string_view word) const;
  // Null when the word has no vector.
  const float* vector(std::string_view word) const;
  double cosine(std::string_view a, std::string_view b) const;
  // The k most similar other words, most similar first (ties by word).
  std::vector<std::pair<std::string, double>> nearest(std::string_view word,
                                                      std::size_t k) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  // Unit-norm rows (zero rows stay zero).
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      vectors_;
};

// word -> ranked neighbors. Text format: one line per word, the word
// followed by its neighbors, whitespace-separated.
class SynonymTable {
 public:
  SynonymTable() = default;
  void set(std::string word, std::vector<std::string> neighbors);
  // Null when the word has no entry.
  const std::vector<std::string>* neighbors(std::string_view word) const;
  std::size_t size() const { return table_.size(); }

  static SynonymTable from_vectors(const WordVectors& vectors,
                                   std::size_t neighbors_per_word,
                                   double min_similarity);
  static SynonymTable parse(std::string_view contents);
  static SynonymTable load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::unordered_map<std::string, std::vector<std::string>> table_;
};

// Symmetric text similarity in [0, 1] with score(a, a) = 1.
using SemanticScorer =
    std::function<double(std::string_view, std::string_view)>;

// Cosine of the mean word vectors of the two texts, clipped at 0. Texts
// without any known word score 0 unless they are identical.
SemanticScorer embedding_cosine_scorer(const WordVectors& vectors);

}  // namespace remark

#endif  // REMARK_WORD_VECTORS_H_
