#ifndef REMARK_PIPELINE_H_
#define REMARK_PIPELINE_H_

// Batched, differentiable forward passes over packed sequences. The public
// single-sequence API in model.h and the training loop both run through
// these functions, so inference and training share one code path.

#include <cmath>
#include <vector>

#include "remark/autograd.h"
#include "remark/corpus.h"
#include "remark/message.h"
#include "remark/model.h"

namespace remark::pipeline {

// Sequences concatenated row-wise; positions restart at 0 per sequence.
struct PackedTokens {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> positions;
  nn::Segments segments;
};

PackedTokens pack(const std::vector<TokenSequence>& sequences);

template <typename T>
nn::Matrix<T> message_matrix(const std::vector<BitMessage>& messages);

// Text encoder followed by the shared normalizer.
template <typename T>
nn::Tensor<T> encode(nn::Tape<T>* tape, const BasicWatermarkModel<T>& model,
                     const PackedTokens& tokens);

// Message projection then the shared normalizer, one row per message.
template <typename T>
nn::Tensor<T> embed_messages(nn::Tape<T>* tape,
                             const BasicWatermarkModel<T>& model,
                             const nn::Matrix<T>& messages);

// Decoder over the fused latents; returns per-row log-probabilities over |V|.
// The decoder consumes the fused sequence both as its input stream and as
// cross-attention memory, so the output length equals the input length.
template <typename T>
nn::Tensor<T> decode_log_probs(nn::Tape<T>* tape,
                               const BasicWatermarkModel<T>& model,
                               const nn::Tensor<T>& fused,
                               const nn::Segments& segments);

// encode -> fuse -> decode for already-masked tokens.
template <typename T>
nn::Tensor<T> watermark_log_probs(nn::Tape<T>* tape,
                                  const BasicWatermarkModel<T>& model,
                                  const PackedTokens& masked_tokens,
                                  const nn::Matrix<T>& messages);

template <typename T>
nn::Tensor<T> map_embedding(nn::Tape<T>* tape,
                            const BasicWatermarkModel<T>& model,
                            const nn::Tensor<T>& distribution);

// Extractor + mean pooling + logistic head; one row of |M| probabilities
// per segment.
template <typename T>
nn::Tensor<T> extract_probabilities(nn::Tape<T>* tape,
                                    const BasicWatermarkModel<T>& model,
                                    const nn::Tensor<T>& embedded,
                                    const nn::Segments& segments);

// Inference-only extraction from discrete tokens; the embedding mapper on
// one-hot rows is a row lookup.
template <typename T>
nn::Matrix<T> extract_from_tokens(const BasicWatermarkModel<T>& model,
                                  const PackedTokens& tokens);

struct LossWeights {
  double w_w = 0.7;
  double w_t = 0.3;
  double w_1 = 0.5;
  double w_2 = 0.5;
};

// Everything random about one training step, drawn up front so a step is a
// pure function of (model, inputs).
template <typename T>
struct StepInputs {
  std::vector<TokenSequence> tokens;
  std::vector<MaskSequence> masks;
  nn::Matrix<T> messages;             // batch x |M|
  nn::Matrix<T> noise;                // packed rows x |V| Gumbel noise
  std::vector<TransformPlan> plans;   // one per sequence
  T tau = T(0.3);
  LossWeights weights;
};

template <typename T>
struct StepOutputs {
  nn::Tensor<T> semantic_loss;
  nn::Tensor<T> message_loss;
  nn::Tensor<T> total_loss;
  nn::Tensor<T> reparameterized;
  nn::Matrix<T> clean_probabilities;
  nn::Matrix<T> transformed_probabilities;
};

// The end-to-end objective: total = w_1 * semantic + w_2 * message with the semantic loss on
// the decoder output and the recovery loss on the clean and transformed
// reparameterized paths.
template <typename T>
StepOutputs<T> forward_losses(nn::Tape<T>* tape,
                              const BasicWatermarkModel<T>& model,
                              const StepInputs<T>& inputs);

// Identity plan for `rows` rows.
TransformPlan identity_plan(std::size_t rows);

}  // namespace remark::pipeline

#endif  // REMARK_PIPELINE_H_
