#include "remark/insertion.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "remark/error.h"
#include "remark/pipeline.h"

namespace remark {

void InsertionConfig::validate() const {
  if (beam_width < 1) throw Error("beam width must be at least 1");
  if (iterations < 1) throw Error("iteration count must be at least 1");
  if (static_cast<int>(temperatures.size()) != iterations) {
    throw Error("need exactly one temperature per iteration");
  }
  for (double t : temperatures) {
    if (!(t > 0.0)) throw Error("temperatures must be positive");
  }
  if (!(mask_pct >= 0.0 && mask_pct <= 1.0)) {
    throw Error("mask_pct must lie in [0, 1]");
  }
}

namespace {

struct Beam {
  double score;
  TokenSequence tokens;
};

bool better(const Beam& a, const Beam& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

double sequence_log_prob(const DistributionRows& distribution,
                         const TokenSequence& tokens) {
  if (static_cast<nn::Index>(tokens.size()) != distribution.rows()) {
    throw Error("sequence length does not match the distribution");
  }
  double score = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= distribution.cols()) {
      throw Error("token id outside the distribution");
    }
    score += std::log(static_cast<double>(
        distribution(static_cast<nn::Index>(i), tokens[i])));
  }
  return score;
}

std::vector<TokenSequence> beam_search(const DistributionRows& distribution,
                                       int beam_width) {
  if (beam_width < 1) throw Error("beam width must be at least 1");
  if (distribution.rows() == 0 || distribution.cols() == 0) {
    throw Error("beam search over an empty distribution");
  }
  const auto width = static_cast<std::size_t>(beam_width);
  const auto vocab = static_cast<std::size_t>(distribution.cols());
  std::vector<Beam> beams = {{0.0, {}}};
  std::vector<double> logp(vocab);
  std::vector<TokenId> order(vocab);
  for (nn::Index row = 0; row < distribution.rows(); ++row) {
    for (std::size_t v = 0; v < vocab; ++v) {
      logp[v] = std::log(static_cast<double>(distribution(row, v)));
    }
    // Only the best `width` tokens of a row can extend any surviving beam.
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(width, vocab);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](TokenId a, TokenId b) {
                        if (logp[a] != logp[b]) return logp[a] > logp[b];
                        return a < b;
                      });
    std::vector<Beam> next;
    next.reserve(beams.size() * keep);
    for (const auto& beam : beams) {
      for (std::size_t j = 0; j < keep; ++j) {
        Beam b{beam.score + logp[order[j]], beam.tokens};
        b.tokens.push_back(order[j]);
        next.push_back(std::move(b));
      }
    }
    const std::size_t survivors = std::min(width, next.size());
    std::partial_sort(next.begin(), next.begin() + survivors, next.end(),
                      better);
    next.resize(survivors);
    beams = std::move(next);
  }
  std::vector<TokenSequence> out;
  out.reserve(beams.size());
  for (auto& b : beams) out.push_back(std::move(b.tokens));
  return out;
}

TokenSequence greedy_decode(const DistributionRows& distribution) {
  const nn::Index first =
      distribution.cols() > static_cast<nn::Index>(Vocabulary::kNumReserved)
          ? static_cast<nn::Index>(Vocabulary::kNumReserved)
          : 0;
  TokenSequence out(static_cast<std::size_t>(distribution.rows()));
  for (nn::Index r = 0; r < distribution.rows(); ++r) {
    nn::Index best = first;
    for (nn::Index c = first + 1; c < distribution.cols(); ++c) {
      if (distribution(r, c) > distribution(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<TokenId>(best);
  }
  return out;
}

std::vector<double> bit_accuracies(const WatermarkModel& model,
                                   const std::vector<TokenSequence>& candidates,
                                   const BitMessage& message) {
  if (message.size() != static_cast<std::size_t>(model.config().message_bits)) {
    throw Error("message length does not match the model");
  }
  if (candidates.empty()) return {};
  const auto probs =
      pipeline::extract_from_tokens<float>(model, pipeline::pack(candidates));
  std::vector<double> acc(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < message.size(); ++j) {
      const std::uint8_t bit =
          probs(static_cast<nn::Index>(c), static_cast<nn::Index>(j)) > 0.5f;
      hits += (bit == message[j]);
    }
    acc[c] = static_cast<double>(hits) / static_cast<double>(message.size());
  }
  return acc;
}

WatermarkedText watermark(const WatermarkModel& model,
                          const TokenSequence& tokens,
                          const BitMessage& message,
                          const InsertionConfig& config, Rng& rng,
                          const CandidateObserver& observer) {
  config.validate();
  if (config.require_trained && model.trained_steps == 0) {
    throw Error("model has not been trained");
  }
  if (tokens.empty()) throw Error("cannot watermark an empty text");
  if (static_cast<int>(tokens.size()) > model.config().max_tokens) {
    throw Error("text exceeds the model's max_tokens");
  }
  const auto vocab = model.config().vocab_size;
  const auto reserved = std::min<nn::Index>(
      static_cast<nn::Index>(Vocabulary::kNumReserved), vocab - 1);

  WatermarkedText best;
  best.source = tokens;
  best.message = message;
  bool have_best = false;
  for (int k = 0; k < config.iterations; ++k) {
    Rng it_rng = rng.split();
    const auto mask = sample_mask(tokens.size(), config.mask_pct, it_rng);
    const auto dist =
        watermark_distribution(model, apply_mask(tokens, mask), message);
    const double tau = config.temperatures[static_cast<std::size_t>(k)];
    DistributionSequence relaxed =
        config.inject_noise
            ? gumbel_softmax(dist, tau, it_rng)
            : gumbel_softmax(dist, tau,
                             nn::Matrix<float>::Zero(dist.rows(), dist.cols()));
    relaxed.leftCols(reserved).setZero();
    const auto candidates = beam_search(relaxed, config.beam_width);
    const auto acc = bit_accuracies(model, candidates, message);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      ++best.candidates_examined;
      if (observer) {
        observer({k, static_cast<int>(c), candidates[c], acc[c]});
      }
      if (!have_best || acc[c] > best.bit_accuracy) {
        have_best = true;
        best.tokens = candidates[c];
        best.bit_accuracy = acc[c];
        best.iteration = k;
      }
    }
  }
  return best;
}

}  // namespace remark
