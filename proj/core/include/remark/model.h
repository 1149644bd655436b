#ifndef REMARK_MODEL_H_
#define REMARK_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "remark/autograd.h"
#include "remark/corpus.h"
#include "remark/message.h"

namespace remark {

// Architecture of the watermarking network. The sequence-to-sequence
// backbone is a small pre-norm transformer trained from scratch; its size is
// a configuration knob.
struct ModelConfig {
  int vocab_size = 0;
  int message_bits = 16;
  int max_tokens = 80;
  int d_model = 128;
  int heads = 4;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int ff_width = 512;
  int extractor_width = 128;
  int extractor_heads = 8;
  int extractor_layers = 3;
  int extractor_ff_width = 512;
  double init_std = 0.02;
  // Token embeddings (shared with the output projection).
  double embedding_init_std = 1.0;
  std::uint64_t seed = 0;

  // Throws remark::Error on inconsistent dimensions.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

namespace nn {

template <typename T>
struct LayerNormParams {
  Tensor<T> gain, bias;
};

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct FeedForwardParams {
  Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> norm1;
  AttentionParams<T> self_attn;
  LayerNormParams<T> norm2;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> norm1;
  AttentionParams<T> self_attn;
  LayerNormParams<T> norm2;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> norm3;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

}  // namespace nn

// Learned parameters of the full pipeline:
//   token/position embeddings and text encoder layers, the shared final
//   normalizer, the message projection, decoder layers with a tied output
//   projection, the distribution-to-embedding mapper and the extractor with
//   its pooled output head.
template <typename T>
class BasicWatermarkModel {
 public:
  using Scalar = T;

  BasicWatermarkModel() = default;
  // Seeded initialization: token embeddings ~ N(0, embedding_init_std),
  // other weight matrices ~ N(0, init_std), biases 0,
  // normalization gains 1.
  explicit BasicWatermarkModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  // All parameters in a fixed registration order.
  std::vector<nn::NamedTensor<T>> parameters() const;
  std::size_t parameter_count() const;

  // Optimizer steps applied so far; zero means untrained.
  std::int64_t trained_steps = 0;

  // Deep copy with a different scalar type.
  template <typename U>
  BasicWatermarkModel<U> cast() const;
  // Deep copy (tensors share storage on plain copy).
  BasicWatermarkModel clone() const { return cast<T>(); }

  nn::Tensor<T> token_embedding;
  nn::Tensor<T> position_embedding;
  std::vector<nn::EncoderLayerParams<T>> encoder;
  nn::LayerNormParams<T> shared_norm;
  nn::Tensor<T> message_w, message_b;
  std::vector<nn::DecoderLayerParams<T>> decoder;
  nn::LayerNormParams<T> decoder_norm;
  nn::Tensor<T> mapper_w, mapper_b;
  std::vector<nn::EncoderLayerParams<T>> extractor;
  nn::LayerNormParams<T> extractor_norm;
  nn::Tensor<T> head_w, head_b;

 private:
  template <typename U>
  friend class BasicWatermarkModel;

  ModelConfig config_;
};

using WatermarkModel = BasicWatermarkModel<float>;

using LatentSequence = nn::Matrix<float>;        // |T| x d_model
using DistributionSequence = nn::Matrix<float>;  // |T'| x |V|
using EmbeddedSequence = nn::Matrix<float>;      // |T'| x extractor_width

// Text encoder output after the shared normalizer. Throws on empty input or
// out-of-range ids.
LatentSequence encode_text(const WatermarkModel& model,
                           const TokenSequence& tokens);

// Normalized message projection as a 1 x d_model row. Throws on length mismatch.
nn::Matrix<float> embed_message(const WatermarkModel& model,
                                const BitMessage& message);

// Adds the message latent to every position.
LatentSequence fuse(const LatentSequence& text_latents,
                    const nn::Matrix<float>& message_latent);

// Decoder output distribution, one row per fused position.
DistributionSequence decode_distribution(const WatermarkModel& model,
                                         const LatentSequence& fused);

// Row-wise Gumbel-softmax relaxation with fresh Gumbel(0,1) noise.
DistributionSequence gumbel_softmax(const DistributionSequence& dist,
                                    double tau, Rng& rng);
// Same with caller-supplied noise (zero noise gives the deterministic
// tempered softmax).
DistributionSequence gumbel_softmax(const DistributionSequence& dist,
                                    double tau, const nn::Matrix<float>& noise);

// Probabilities are clamped here before the log.
inline constexpr double kProbabilityFloor = 1e-9;

enum class TransformKind { kDrop, kAdd, kReplace };

const char* transform_name(TransformKind kind);

// Row plan shared by the differentiable training path and the public
// transform: sources[i] >= 0 copies that input row, otherwise row i is the
// one-hot row for onehot[i].
struct TransformPlan {
  std::vector<nn::Index> sources;
  std::vector<std::int32_t> onehot;
};

// Random tokens are drawn uniformly from the non-reserved ids.
TransformPlan plan_transform(std::size_t rows, std::size_t vocab_size,
                             TransformKind kind, double rate, Rng& rng);

DistributionSequence transform_distribution(const DistributionSequence& dist,
                                            TransformKind kind, double rate,
                                            Rng& rng);

// dist * mapper_w + mapper_b.
EmbeddedSequence map_embedding(const WatermarkModel& model,
                               const DistributionSequence& dist);

struct Extraction {
  std::vector<double> probabilities;
  BitMessage bits;
};

// Extractor, mean pooling over positions, logistic head; bit i is 1 iff its
// probability is strictly greater than 0.5.
Extraction extract(const WatermarkModel& model, const EmbeddedSequence& embedded);

// Bits from probabilities under the strict > 0.5 rule.
BitMessage threshold_bits(const std::vector<double>& probabilities);

// Full forward pass for one already-masked sequence and a message.
DistributionSequence watermark_distribution(const WatermarkModel& model,
                                            const TokenSequence& masked_tokens,
                                            const BitMessage& message);

// Extraction from discrete tokens (one-hot rows through the mapper).
Extraction extract_tokens(const WatermarkModel& model,
                          const TokenSequence& tokens);

}  // namespace remark

#endif  // REMARK_MODEL_H_
