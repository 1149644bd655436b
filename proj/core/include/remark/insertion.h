#ifndef REMARK_INSERTION_H_
#define REMARK_INSERTION_H_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "remark/corpus.h"
#include "remark/message.h"
#include "remark/model.h"
#include "remark/rng.h"

namespace remark {

struct InsertionConfig {
  int beam_width = 5;
  int iterations = 5;
  // One temperature per iteration.
  std::vector<double> temperatures = {1.0, 1.0, 1.5, 1.5, 2.0};
  double mask_pct = 0.5;
  // Without noise each iteration uses the deterministic tempered softmax.
  bool inject_noise = true;
  // Refuse to watermark with a model that has never been trained.
  bool require_trained = true;
  std::uint64_t seed = 0;

  void validate() const;
};

using DistributionRows = Eigen::Ref<const nn::Matrix<float>>;

// The `beam_width` highest-scoring sequences under the sum of per-row
// log-probabilities, best first. Equal scores are ordered lexicographically
// by token ids. Every column is a candidate token.
std::vector<TokenSequence> beam_search(const DistributionRows& distribution,
                                       int beam_width);

// Same scoring used by beam_search, exposed for callers that rank their own
// sequences.
double sequence_log_prob(const DistributionRows& distribution,
                         const TokenSequence& tokens);

// Row-wise argmax over the non-reserved ids (lowest id on ties). Accepts
// probabilities or log-probabilities.
TokenSequence greedy_decode(const DistributionRows& distribution);

struct InsertionCandidate {
  int iteration = 0;
  int rank = 0;
  TokenSequence tokens;
  double bit_accuracy = 0.0;
};

using CandidateObserver = std::function<void(const InsertionCandidate&)>;

struct WatermarkedText {
  TokenSequence tokens;
  TokenSequence source;
  BitMessage message;
  double bit_accuracy = 0.0;
  int iteration = 0;
  int candidates_examined = 0;
};

// Iterated masked decoding with beam search. Each iteration draws a fresh
// mask and temperature-scaled relaxation, beam-searches it and keeps the
// candidate whose extracted bits best match `message` (strictly better
// replaces; the first candidate seeds the search). Reserved ids are never
// emitted.
WatermarkedText watermark(const WatermarkModel& model,
                          const TokenSequence& tokens,
                          const BitMessage& message,
                          const InsertionConfig& config, Rng& rng,
                          const CandidateObserver& observer = {});

// Fraction of message bits recovered from each candidate, in one batch.
std::vector<double> bit_accuracies(const WatermarkModel& model,
                                   const std::vector<TokenSequence>& candidates,
                                   const BitMessage& message);

}  // namespace remark

#endif  // REMARK_INSERTION_H_
