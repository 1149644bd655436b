#include "remark/word_vectors.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "remark/checkpoint.h"
#include "remark/corpus.h"
#include "remark/error.h"

namespace remark {

WordVectors WordVectors::train(std::span<const std::string> texts,
                               const Options& options) {
  if (options.dimensions < 1 || options.window < 1 || options.max_words < 1) {
    throw Error("word vector options must be positive");
  }
  std::map<std::string, std::size_t> counts;
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(texts.size());
  for (const auto& t : texts) {
    sentences.push_back(split_words(t));
    for (const auto& w : sentences.back()) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [w, c] : counts) {
    if (c >= options.min_count) ranked.emplace_back(w, c);
  }
  if (ranked.empty()) throw Error("no words to embed");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > options.max_words) ranked.resize(options.max_words);

  WordVectors wv;
  for (const auto& [w, c] : ranked) {
    wv.index_.emplace(w, wv.words_.size());
    wv.words_.push_back(w);
  }
  const auto n = static_cast<Eigen::Index>(wv.words_.size());
  Eigen::MatrixXd cooc = Eigen::MatrixXd::Zero(n, n);
  for (const auto& sent : sentences) {
    std::vector<Eigen::Index> ids;
    ids.reserve(sent.size());
    for (const auto& w : sent) {
      auto it = wv.index_.find(w);
      ids.push_back(it == wv.index_.end() ? -1
                                          : static_cast<Eigen::Index>(it->second));
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0) continue;
      const std::size_t hi =
          std::min(ids.size(), i + static_cast<std::size_t>(options.window) + 1);
      for (std::size_t j = i + 1; j < hi; ++j) {
        if (ids[j] < 0) continue;
        cooc(ids[i], ids[j]) += 1.0;
        cooc(ids[j], ids[i]) += 1.0;
      }
    }
  }
  const Eigen::VectorXd row = cooc.rowwise().sum();
  const double total = row.sum();
  Eigen::MatrixXd ppmi = Eigen::MatrixXd::Zero(n, n);
  if (total > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (cooc(i, j) <= 0.0) continue;
        const double pmi = std::log(cooc(i, j) * total / (row(i) * row(j)));
        ppmi(i, j) = std::max(0.0, pmi);
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ppmi);
  const Eigen::Index dims = std::min<Eigen::Index>(options.dimensions, n);
  // Eigenvalues come in ascending order; keep the largest magnitudes.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(b));
  });
  Eigen::MatrixXd vecs(n, dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    const auto k = order[static_cast<std::size_t>(d)];
    auto col = eig.eigenvectors().col(k);
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    const double sign = col(arg) < 0.0 ? -1.0 : 1.0;
    vecs.col(d) = sign * std::sqrt(std::abs(eig.eigenvalues()(k))) * col;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = vecs.row(i).norm();
    if (norm > 0.0) vecs.row(i) /= norm;
  }
  wv.vectors_ = vecs.cast<float>();
  return wv;
}

bool WordVectors::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

const float* WordVectors::vector(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return nullptr;
  return vectors_.data() + static_cast<Eigen::Index>(it->second) * vectors_.cols();
}

double WordVectors::cosine(std::string_view a, std::string_view b) const {
  auto ia = index_.find(std::string(a));
  auto ib = index_.find(std::string(b));
  if (ia == index_.end() || ib == index_.end()) {
    throw Error("word has no vector");
  }
  return static_cast<double>(
      vectors_.row(static_cast<Eigen::Index>(ia->second))
          .dot(vectors_.row(static_cast<Eigen::Index>(ib->second))));
}

std::vector<std::pair<std::string, double>> WordVectors::nearest(
    std::string_view word, std::size_t k) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return {};
  const auto self = static_cast<Eigen::Index>(it->second);
  const Eigen::VectorXf sims = vectors_ * vectors_.row(self).transpose();
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index i = 0; i < sims.size(); ++i) {
    if (i == self) continue;
    out.emplace_back(words_[static_cast<std::size_t>(i)],
                     static_cast<double>(sims(i)));
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + keep, out.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  out.resize(keep);
  return out;
}

void SynonymTable::set(std::string word, std::vector<std::string> neighbors) {
  table_[std::move(word)] = std::move(neighbors);
}

const std::vector<std::string>* SynonymTable::neighbors(
    std::string_view word) const {
  auto it = table_.find(std::string(word));
  return it == table_.end() ? nullptr : &it->second;
}

SynonymTable SynonymTable::from_vectors(const WordVectors& vectors,
                                        std::size_t neighbors_per_word,
                                        double min_similarity) {
  SynonymTable table;
  for (const auto& w : vectors.words()) {
    std::vector<std::string> ns;
    for (auto& [n, sim] : vectors.nearest(w, neighbors_per_word)) {
      if (sim >= min_similarity) ns.push_back(std::move(n));
    }
    if (!ns.empty()) table.set(w, std::move(ns));
  }
  return table;
}

SynonymTable SynonymTable::parse(std::string_view contents) {
  SynonymTable table;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_words(line);
    if (words.size() < 2) continue;
    std::string head = std::move(words.front());
    words.erase(words.begin());
    table.set(std::move(head), std::move(words));
  }
  return table;
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::string SynonymTable::serialize() const {
  std::vector<const std::pair<const std::string, std::vector<std::string>>*>
      entries;
  for (const auto& e : table_) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(),
            [](auto a, auto b) { return a->first < b->first; });
  std::string out;
  for (const auto* e : entries) {
    out += e->first;
    for (const auto& n : e->second) out += ' ' + n;
    out += '\n';
  }
  return out;
}

SemanticScorer embedding_cosine_scorer(const WordVectors& vectors) {
  auto wv = std::make_shared<const WordVectors>(vectors);
  return [wv](std::string_view a, std::string_view b) -> double {
    const auto wa = split_words(a);
    const auto wb = split_words(b);
    if (wa == wb) return 1.0;
    auto mean = [&](const std::vector<std::string>& words) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(wv->dimensions());
      for (const auto& w : words) {
        if (const float* v = wv->vector(w)) {
          for (int d = 0; d < wv->dimensions(); ++d) m(d) += v[d];
        }
      }
      return m;
    };
    const Eigen::VectorXd ma = mean(wa);
    const Eigen::VectorXd mb = mean(wb);
    const double na = ma.norm();
    const double nb = mb.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double cos = ma.dot(mb) / (na * nb);
    return std::clamp(cos, 0.0, 1.0);
  };
}

}  // namespace remark
