#include "remark/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "remark/error.h"
#include "remark/message.h"
#include "remark/pipeline.h"
#include "remark/rng.h"
#include "remark/verification.h"

namespace remark {

namespace {

struct NgramStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

using Ngram = std::vector<TokenId>;

std::map<Ngram, std::size_t> ngram_counts(std::span<const TokenId> seq,
                                          std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[Ngram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                   seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

void accumulate(NgramStats& stats, std::span<const TokenId> candidate,
                std::span<const TokenId> reference) {
  if (candidate.empty() || reference.empty()) {
    throw Error("BLEU needs non-empty candidate and reference");
  }
  stats.candidate_length += candidate.size();
  stats.reference_length += reference.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    for (const auto& [gram, count] : cand) {
      stats.totals[n - 1] += count;
      auto it = ref.find(gram);
      if (it != ref.end()) stats.matches[n - 1] += std::min(count, it->second);
    }
  }
}

double bleu_from(const NgramStats& stats) {
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (stats.totals[n] == 0) continue;
    if (stats.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(stats.matches[n]) /
                        static_cast<double>(stats.totals[n]));
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double c = static_cast<double>(stats.candidate_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / orders);
}

}  // namespace

double bleu4(std::span<const TokenId> candidate,
             std::span<const TokenId> reference) {
  NgramStats stats;
  accumulate(stats, candidate, reference);
  return bleu_from(stats);
}

double bleu4(std::string_view candidate, std::string_view reference) {
  std::unordered_map<std::string, TokenId> ids;
  auto encode = [&](std::string_view text) {
    TokenSequence out;
    for (auto& w : split_words(text)) {
      auto [it, _] = ids.emplace(std::move(w), static_cast<TokenId>(ids.size()));
      out.push_back(it->second);
    }
    return out;
  };
  const auto c = encode(candidate);
  const auto r = encode(reference);
  return bleu4(c, r);
}

double corpus_bleu4(
    const std::vector<std::pair<TokenSequence, TokenSequence>>& pairs) {
  if (pairs.empty()) throw Error("corpus BLEU needs at least one pair");
  NgramStats stats;
  for (const auto& [c, r] : pairs) accumulate(stats, c, r);
  return bleu_from(stats);
}

double semantic_score(std::string_view a, std::string_view b,
                      const SemanticScorer& scorer) {
  if (!scorer) throw Error("no semantic scorer supplied");
  return scorer(a, b);
}

namespace {

// below + ties / 2 for each score; exact in double for realistic sizes.
std::vector<double> pair_wins(std::span<const double> scores,
                              std::span<const double> reference) {
  if (scores.empty() || reference.empty()) {
    throw Error("AUC needs non-empty score lists");
  }
  std::vector<double> sorted(reference.begin(), reference.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), s);
    const auto hi = std::upper_bound(lo, sorted.end(), s);
    out.push_back(static_cast<double>(lo - sorted.begin()) +
                  0.5 * static_cast<double>(hi - lo));
  }
  return out;
}

}  // namespace

std::vector<double> placement_values(std::span<const double> scores,
                                     std::span<const double> reference) {
  auto wins = pair_wins(scores, reference);
  for (double& w : wins) w /= static_cast<double>(reference.size());
  return wins;
}

double detection_auc(std::span<const double> watermarked,
                     std::span<const double> clean) {
  const auto wins = pair_wins(watermarked, clean);
  const double total = std::accumulate(wins.begin(), wins.end(), 0.0);
  return total / (static_cast<double>(watermarked.size()) *
                  static_cast<double>(clean.size()));
}

std::vector<RocPoint> roc_curve(std::span<const double> watermarked,
                                std::span<const double> clean) {
  if (watermarked.empty() || clean.empty()) {
    throw Error("ROC needs non-empty score lists");
  }
  std::vector<double> thresholds(watermarked.begin(), watermarked.end());
  thresholds.insert(thresholds.end(), clean.begin(), clean.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::vector<double> pos(watermarked.begin(), watermarked.end());
  std::vector<double> neg(clean.begin(), clean.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_least = [](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t)) /
           static_cast<double>(v.size());
  };
  std::vector<RocPoint> out;
  out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  for (double t : thresholds) out.push_back({at_least(neg, t), at_least(pos, t), t});
  return out;
}

std::string roc_csv(const std::vector<RocPoint>& points) {
  std::ostringstream out;
  out.precision(10);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : points) {
    out << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
  }
  return out.str();
}

double integrity_sweep(const WatermarkModel& model,
                       const std::vector<TokenSequence>& clean_texts,
                       std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw Error("integrity sweep needs at least one trial");
  if (clean_texts.empty()) throw Error("integrity sweep needs clean texts");
  Rng rng(seed);
  const auto bits = static_cast<std::size_t>(model.config().message_bits);
  constexpr std::size_t kChunk = 64;
  std::size_t matches = 0;
  for (std::size_t start = 0; start < trials; start += kChunk) {
    const std::size_t end = std::min(trials, start + kChunk);
    std::vector<TokenSequence> batch;
    for (std::size_t t = start; t < end; ++t) {
      batch.push_back(clean_texts[t % clean_texts.size()]);
    }
    const auto probs =
        pipeline::extract_from_tokens<float>(model, pipeline::pack(batch));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto message = BitMessage::random(bits, rng);
      for (std::size_t j = 0; j < bits; ++j) {
        const std::uint8_t bit =
            probs(static_cast<nn::Index>(b), static_cast<nn::Index>(j)) > 0.5f;
        matches += (bit == message[j]);
      }
    }
  }
  return static_cast<double>(matches) / static_cast<double>(trials * bits);
}

FrequencyProfile word_frequency_profile(std::span<const std::string> texts) {
  if (texts.empty()) throw Error("frequency profile needs texts");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++counts[std::move(w)];
  }
  FrequencyProfile out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  return out;
}

double profile_distance(const FrequencyProfile& a, const FrequencyProfile& b,
                        std::size_t top_k) {
  if (top_k == 0) throw Error("top_k must be positive");
  auto normalized = [top_k](const FrequencyProfile& p) {
    std::map<std::string, double> out;
    const std::size_t k = std::min(top_k, p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += static_cast<double>(p[i].second);
    for (std::size_t i = 0; i < k; ++i) {
      out[p[i].first] = total > 0.0 ? static_cast<double>(p[i].second) / total : 0.0;
    }
    return out;
  };
  const auto pa = normalized(a);
  const auto pb = normalized(b);
  std::map<std::string, double> diff;
  for (const auto& [w, p] : pa) diff[w] += p;
  for (const auto& [w, p] : pb) diff[w] -= p;
  double tv = 0.0;
  for (const auto& [w, d] : diff) tv += std::abs(d);
  return 0.5 * tv;
}

void NaiveBayesClassifier::fit(const std::vector<std::string>& texts,
                               const std::vector<int>& labels) {
  if (texts.size() != labels.size() || texts.empty()) {
    throw Error("classifier needs one label per text");
  }
  std::map<std::string, std::array<double, 2>> counts;
  std::array<double, 2> docs{}, words{};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
    docs[static_cast<std::size_t>(y)] += 1.0;
    for (const auto& w : split_words(texts[i])) {
      counts[w][static_cast<std::size_t>(y)] += 1.0;
      words[static_cast<std::size_t>(y)] += 1.0;
    }
  }
  const double vocab = static_cast<double>(counts.size()) + 1.0;
  log_likelihood_.clear();
  for (std::size_t c = 0; c < 2; ++c) {
    log_prior_[c] = std::log((docs[c] + 1.0) /
                             (static_cast<double>(texts.size()) + 2.0));
    unseen_[c] = std::log(1.0 / (words[c] + vocab));
  }
  for (const auto& [w, n] : counts) {
    auto& ll = log_likelihood_[w];
    for (std::size_t c = 0; c < 2; ++c) {
      ll[c] = std::log((n[c] + 1.0) / (words[c] + vocab));
    }
  }
}

int NaiveBayesClassifier::predict(std::string_view text) const {
  std::array<double, 2> score = log_prior_;
  for (const auto& w : split_words(text)) {
    auto it = log_likelihood_.find(w);
    for (std::size_t c = 0; c < 2; ++c) {
      score[c] += it == log_likelihood_.end() ? unseen_[c] : it->second[c];
    }
  }
  return score[1] > score[0] ? 1 : 0;
}

ClassifierReport detection_classifier_harness(
    const std::vector<std::string>& watermarked,
    const std::vector<std::string>& clean, TextClassifier& classifier,
    const ClassifierHarnessConfig& config) {
  if (watermarked.empty() || clean.empty()) {
    throw Error("both classes need samples");
  }
  const double ratio =
      static_cast<double>(std::max(watermarked.size(), clean.size())) /
      static_cast<double>(std::min(watermarked.size(), clean.size()));
  if (ratio > 10.0) throw Error("class imbalance beyond 10:1");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw Error("train_fraction must lie in (0, 1)");
  }
  std::vector<std::pair<const std::string*, int>> samples;
  for (const auto& t : watermarked) samples.emplace_back(&t, 1);
  for (const auto& t : clean) samples.emplace_back(&t, 0);
  Rng rng(config.seed);
  for (std::size_t i = samples.size(); i > 1; --i) {
    std::swap(samples[i - 1], samples[rng.index(i)]);
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.train_fraction *
                                            static_cast<double>(samples.size()))),
      1, samples.size() - 1);
  std::vector<std::string> train_texts;
  std::vector<int> train_labels;
  for (std::size_t i = 0; i < n_train; ++i) {
    train_texts.push_back(*samples[i].first);
    train_labels.push_back(samples[i].second);
  }
  if (config.shuffle_labels) {
    for (std::size_t i = train_labels.size(); i > 1; --i) {
      std::swap(train_labels[i - 1], train_labels[rng.index(i)]);
    }
  }
  classifier.fit(train_texts, train_labels);
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = n_train; i < samples.size(); ++i) {
    const int y = samples[i].second;
    const int p = classifier.predict(*samples[i].first);
    correct += (p == y);
    tp += (p == 1 && y == 1);
    fp += (p == 1 && y == 0);
    fn += (p == 0 && y == 1);
  }
  ClassifierReport report;
  report.train_size = n_train;
  report.test_size = samples.size() - n_train;
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(report.test_size);
  report.f1 = tp == 0 ? 0.0
                      : 2.0 * static_cast<double>(tp) /
                            static_cast<double>(2 * tp + fp + fn);
  return report;
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

double paired_one_sided_p(std::span<const double> differences) {
  if (differences.size() < 2) throw Error("paired test needs two samples");
  const auto s = summarize(differences);
  if (s.stddev == 0.0) return s.mean > 0.0 ? 0.0 : 1.0;
  const double z =
      s.mean / (s.stddev / std::sqrt(static_cast<double>(s.count)));
  return one_sided_p(z);
}

std::string metric_report_to_json(const MetricReport& r) {
  using nlohmann::json;
  json obj;
  obj["samples"] = r.samples;
  obj["mean_wer"] = r.mean_wer;
  obj["mean_semantic_score"] =
      r.mean_semantic_score ? json(*r.mean_semantic_score) : json(nullptr);
  obj["mean_bleu4"] = r.mean_bleu4 ? json(*r.mean_bleu4) : json(nullptr);
  obj["z"] = {{"count", r.z.count}, {"mean", r.z.mean},
              {"stddev", r.z.stddev}, {"min", r.z.min},
              {"median", r.z.median}, {"max", r.z.max}};
  obj["auc"] = r.auc_per_attack;
  if (r.seconds_per_sample) obj["seconds_per_sample"] = *r.seconds_per_sample;
  return obj.dump(2);
}

}  // namespace remark
