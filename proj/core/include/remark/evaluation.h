#ifndef REMARK_EVALUATION_H_
#define REMARK_EVALUATION_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "remark/corpus.h"
#include "remark/model.h"
#include "remark/word_vectors.h"

namespace remark {

// Clipped n-gram precisions for n = 1..4 with uniform weights and the
// brevity penalty, no smoothing. Orders longer than the candidate are left
// out of the geometric mean.
double bleu4(std::span<const TokenId> candidate,
             std::span<const TokenId> reference);
double bleu4(std::string_view candidate, std::string_view reference);

// Corpus-level BLEU-4: counts and lengths are pooled before the ratio.
double corpus_bleu4(const std::vector<std::pair<TokenSequence, TokenSequence>>&
                        candidate_reference_pairs);

// Throws when no scorer is supplied.
double semantic_score(std::string_view a, std::string_view b,
                      const SemanticScorer& scorer);

// P(watermarked statistic > clean statistic) with ties counted half.
double detection_auc(std::span<const double> watermarked,
                     std::span<const double> clean);

// Per-sample placement values of `scores` against `reference` (fraction of
// the reference below each score, ties half); their mean is the AUC.
std::vector<double> placement_values(std::span<const double> scores,
                                     std::span<const double> reference);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// Points for thresholds at every distinct score (predict positive iff
// score >= threshold), from (0, 0) to (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> watermarked,
                                std::span<const double> clean);
std::string roc_csv(const std::vector<RocPoint>& points);

// Mean WER of extraction from clean texts against a fresh random message
// per trial; trials cycle through the corpus.
double integrity_sweep(const WatermarkModel& model,
                       const std::vector<TokenSequence>& clean_texts,
                       std::size_t trials, std::uint64_t seed);

using FrequencyProfile = std::vector<std::pair<std::string, std::size_t>>;

// Word counts, descending, ties by word.
FrequencyProfile word_frequency_profile(std::span<const std::string> texts);

// Total variation distance between the two profiles, each renormalized over
// its own top-k words, on the union of those words.
double profile_distance(const FrequencyProfile& a, const FrequencyProfile& b,
                        std::size_t top_k = 50);

class TextClassifier {
 public:
  virtual ~TextClassifier() = default;
  virtual void fit(const std::vector<std::string>& texts,
                   const std::vector<int>& labels) = 0;
  virtual int predict(std::string_view text) const = 0;
};

// Multinomial naive Bayes over words with add-one smoothing.
class NaiveBayesClassifier : public TextClassifier {
 public:
  void fit(const std::vector<std::string>& texts,
           const std::vector<int>& labels) override;
  int predict(std::string_view text) const override;

 private:
  std::map<std::string, std::array<double, 2>> log_likelihood_;
  std::array<double, 2> log_prior_{};
  std::array<double, 2> unseen_{};
};

struct ClassifierHarnessConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  // Randomly permute the training labels (null baseline).
  bool shuffle_labels = false;
};

struct ClassifierReport {
  double accuracy = 0.0;
  // F1 of the watermarked class; 0 when it is never predicted.
  double f1 = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

// Watermarked texts are label 1, clean texts label 0. Throws when either
// class is empty or one outnumbers the other more than 10:1.
ClassifierReport detection_classifier_harness(
    const std::vector<std::string>& watermarked,
    const std::vector<std::string>& clean, TextClassifier& classifier,
    const ClassifierHarnessConfig& config = {});

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};
SummaryStats summarize(std::span<const double> values);

// One-sided test that the mean of `differences` is positive: returns the
// upper-tail normal p-value of mean / standard error.
double paired_one_sided_p(std::span<const double> differences);

struct MetricReport {
  std::size_t samples = 0;
  double mean_wer = 0.0;
  std::optional<double> mean_semantic_score;
  std::optional<double> mean_bleu4;
  SummaryStats z;
  std::map<std::string, double> auc_per_attack;
  std::optional<double> seconds_per_sample;
};
std::string metric_report_to_json(const MetricReport& report);

}  // namespace remark

#endif  // REMARK_EVALUATION_H_
