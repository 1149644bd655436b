#include "remark/pipeline.h"

#include <cmath>

#include "remark/error.h"

namespace remark::pipeline {

using nn::Index;
using nn::Matrix;
using nn::Segments;
using nn::Tape;
using nn::Tensor;

PackedTokens pack(const std::vector<TokenSequence>& sequences) {
  PackedTokens packed;
  std::vector<Index> lengths;
  lengths.reserve(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.empty()) throw Error("cannot pack an empty sequence");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      packed.ids.push_back(seq[i]);
      packed.positions.push_back(static_cast<std::int32_t>(i));
    }
    lengths.push_back(static_cast<Index>(seq.size()));
  }
  packed.segments = nn::make_segments(lengths);
  return packed;
}

TransformPlan identity_plan(std::size_t rows) {
  TransformPlan plan;
  plan.sources.resize(rows);
  plan.onehot.assign(rows, -1);
  for (std::size_t i = 0; i < rows; ++i) {
    plan.sources[i] = static_cast<Index>(i);
  }
  return plan;
}

template <typename T>
Matrix<T> message_matrix(const std::vector<BitMessage>& messages) {
  if (messages.empty()) return Matrix<T>(0, 0);
  Matrix<T> m(static_cast<Index>(messages.size()),
              static_cast<Index>(messages.front().size()));
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i].size() != messages.front().size()) {
      throw Error("messages in a batch must share a length");
    }
    for (std::size_t j = 0; j < messages[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = T(messages[i][j]);
    }
  }
  return m;
}

namespace {

template <typename T>
Tensor<T> norm(Tape<T>* tape, const Tensor<T>& x,
               const nn::LayerNormParams<T>& p) {
  return nn::layer_norm(tape, x, p.gain, p.bias);
}

template <typename T>
Tensor<T> attention_block(Tape<T>* tape, const Tensor<T>& queries,
                          const Tensor<T>& memory,
                          const nn::AttentionParams<T>& p, int heads,
                          const Segments& q_segments,
                          const Segments& kv_segments) {
  const auto q = nn::linear(tape, queries, p.wq, p.bq);
  const auto k = nn::linear(tape, memory, p.wk, p.bk);
  const auto v = nn::linear(tape, memory, p.wv, p.bv);
  const auto a = nn::attention(tape, q, k, v, heads, q_segments, kv_segments);
  return nn::linear(tape, a, p.wo, p.bo);
}

template <typename T>
Tensor<T> feed_forward(Tape<T>* tape, const Tensor<T>& x,
                       const nn::FeedForwardParams<T>& p) {
  const auto h = nn::gelu(tape, nn::linear(tape, x, p.w1, p.b1));
  return nn::linear(tape, h, p.w2, p.b2);
}

// Pre-norm transformer layer without masking.
template <typename T>
Tensor<T> encoder_layer(Tape<T>* tape, Tensor<T> x,
                        const nn::EncoderLayerParams<T>& p, int heads,
                        const Segments& segments) {
  const auto h = norm(tape, x, p.norm1);
  x = nn::add(tape, x,
              attention_block(tape, h, h, p.self_attn, heads, segments,
                              segments));
  const auto h2 = norm(tape, x, p.norm2);
  return nn::add(tape, x, feed_forward(tape, h2, p.ffn));
}

}  // namespace

template <typename T>
Tensor<T> encode(Tape<T>* tape, const BasicWatermarkModel<T>& model,
                 const PackedTokens& tokens) {
  const auto& cfg = model.config();
  auto x = nn::embedding(tape, model.token_embedding, tokens.ids);
  x = nn::add_position(tape, x, model.position_embedding, tokens.positions);
  for (const auto& layer : model.encoder) {
    x = encoder_layer(tape, x, layer, cfg.heads, tokens.segments);
  }
  return norm(tape, x, model.shared_norm);
}

template <typename T>
Tensor<T> embed_messages(Tape<T>* tape, const BasicWatermarkModel<T>& model,
                         const Matrix<T>& messages) {
  if (messages.cols() != model.config().message_bits) {
    throw Error("message length does not match the model");
  }
  Tensor<T> m(messages);
  const auto projected = nn::linear(tape, m, model.message_w, model.message_b);
  return norm(tape, projected, model.shared_norm);
}

template <typename T>
Tensor<T> decode_log_probs(Tape<T>* tape, const BasicWatermarkModel<T>& model,
                           const Tensor<T>& fused, const Segments& segments) {
  const auto& cfg = model.config();
  Tensor<T> x = fused;
  for (const auto& layer : model.decoder) {
    const auto h1 = norm(tape, x, layer.norm1);
    x = nn::add(tape, x,
                attention_block(tape, h1, h1, layer.self_attn, cfg.heads,
                                segments, segments));
    const auto h2 = norm(tape, x, layer.norm2);
    x = nn::add(tape, x,
                attention_block(tape, h2, fused, layer.cross_attn, cfg.heads,
                                segments, segments));
    const auto h3 = norm(tape, x, layer.norm3);
    x = nn::add(tape, x, feed_forward(tape, h3, layer.ffn));
  }
  // Tied output projection, scaled by 1/sqrt(d) against the unit-variance
  // token embeddings.
  const auto y = nn::scale(tape, norm(tape, x, model.decoder_norm),
                           static_cast<T>(1.0 / std::sqrt(cfg.d_model)));
  const auto logits = nn::matmul_transposed(tape, y, model.token_embedding);
  return nn::log_softmax_rows(tape, logits);
}

template <typename T>
Tensor<T> watermark_log_probs(Tape<T>* tape,
                              const BasicWatermarkModel<T>& model,
                              const PackedTokens& masked_tokens,
                              const Matrix<T>& messages) {
  if (static_cast<std::size_t>(messages.rows()) !=
      masked_tokens.segments.size()) {
    throw Error("one message per sequence is required");
  }
  const auto text = encode(tape, model, masked_tokens);
  const auto msg = embed_messages(tape, model, messages);
  const auto fused =
      nn::add_segment_rows(tape, text, masked_tokens.segments, msg);
  return decode_log_probs(tape, model, fused, masked_tokens.segments);
}

template <typename T>
Tensor<T> map_embedding(Tape<T>* tape, const BasicWatermarkModel<T>& model,
                        const Tensor<T>& distribution) {
  return nn::linear(tape, distribution, model.mapper_w, model.mapper_b);
}

template <typename T>
Tensor<T> extract_probabilities(Tape<T>* tape,
                                const BasicWatermarkModel<T>& model,
                                const Tensor<T>& embedded,
                                const Segments& segments) {
  const auto& cfg = model.config();
  Tensor<T> x = embedded;
  for (const auto& layer : model.extractor) {
    x = encoder_layer(tape, x, layer, cfg.extractor_heads, segments);
  }
  x = norm(tape, x, model.extractor_norm);
  const auto pooled = nn::mean_pool(tape, x, segments);
  return nn::sigmoid(tape, nn::linear(tape, pooled, model.head_w, model.head_b));
}

template <typename T>
Matrix<T> extract_from_tokens(const BasicWatermarkModel<T>& model,
                              const PackedTokens& tokens) {
  auto h = nn::embedding<T>(nullptr, model.mapper_w, tokens.ids);
  h.mutable_value().rowwise() += model.mapper_b.value().row(0);
  return extract_probabilities<T>(nullptr, model, h, tokens.segments).value();
}

template <typename T>
StepOutputs<T> forward_losses(Tape<T>* tape,
                              const BasicWatermarkModel<T>& model,
                              const StepInputs<T>& in) {
  const std::size_t batch = in.tokens.size();
  if (batch == 0 || in.masks.size() != batch || in.plans.size() != batch ||
      static_cast<std::size_t>(in.messages.rows()) != batch) {
    throw Error("training step: inconsistent batch");
  }
  std::vector<TokenSequence> masked;
  masked.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    masked.push_back(apply_mask(in.tokens[b], in.masks[b]));
  }
  const auto packed = pack(masked);
  std::vector<std::int32_t> targets;
  targets.reserve(packed.ids.size());
  for (const auto& seq : in.tokens) targets.insert(targets.end(), seq.begin(), seq.end());

  const auto log_probs = watermark_log_probs(tape, model, packed, in.messages);
  const T log_floor = static_cast<T>(std::log(kProbabilityFloor));
  const auto reparam =
      nn::gumbel_softmax(tape, log_probs, in.noise, in.tau, log_floor);

  // Clean path.
  const auto h_clean = map_embedding(tape, model, reparam);
  const auto m_clean =
      extract_probabilities(tape, model, h_clean, packed.segments);

  // Transformed path: per-sequence plans become one packed row selection.
  std::vector<Index> sources;
  std::vector<std::int32_t> onehot;
  std::vector<Index> lengths;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& plan = in.plans[b];
    const auto& seg = packed.segments[b];
    for (std::size_t i = 0; i < plan.sources.size(); ++i) {
      if (plan.sources[i] >= seg.length) {
        throw Error("transform plan exceeds its sequence");
      }
      sources.push_back(plan.sources[i] >= 0 ? seg.offset + plan.sources[i]
                                             : -1);
      onehot.push_back(plan.onehot[i]);
    }
    lengths.push_back(static_cast<Index>(plan.sources.size()));
  }
  const auto transformed_segments = nn::make_segments(lengths);
  const auto transformed = nn::select_rows(tape, reparam, sources, onehot);
  const auto h_t = map_embedding(tape, model, transformed);
  const auto m_t =
      extract_probabilities(tape, model, h_t, transformed_segments);

  const auto& w = in.weights;
  StepOutputs<T> out;
  out.semantic_loss = nn::sequence_nll(tape, log_probs, targets, packed.segments);
  out.message_loss = nn::weighted_sum<T>(
      tape,
      {nn::l1_rows(tape, m_clean, in.messages),
       nn::l1_rows(tape, m_t, in.messages)},
      {static_cast<T>(w.w_w), static_cast<T>(w.w_t)});
  out.total_loss = nn::weighted_sum<T>(
      tape, {out.semantic_loss, out.message_loss},
      {static_cast<T>(w.w_1), static_cast<T>(w.w_2)});
  out.reparameterized = reparam;
  out.clean_probabilities = m_clean.value();
  out.transformed_probabilities = m_t.value();
  return out;
}

#define REMARK_INSTANTIATE_PIPELINE(T)                                        \
  template Matrix<T> message_matrix<T>(const std::vector<BitMessage>&);       \
  template Tensor<T> encode(Tape<T>*, const BasicWatermarkModel<T>&,          \
                            const PackedTokens&);                             \
  template Tensor<T> embed_messages(Tape<T>*, const BasicWatermarkModel<T>&,  \
                                    const Matrix<T>&);                        \
  template Tensor<T> decode_log_probs(Tape<T>*, const BasicWatermarkModel<T>&,\
                                      const Tensor<T>&, const Segments&);     \
  template Tensor<T> watermark_log_probs(                                     \
      Tape<T>*, const BasicWatermarkModel<T>&, const PackedTokens&,           \
      const Matrix<T>&);                                                      \
  template Tensor<T> map_embedding(Tape<T>*, const BasicWatermarkModel<T>&,   \
                                   const Tensor<T>&);                         \
  template Tensor<T> extract_probabilities(                                   \
      Tape<T>*, const BasicWatermarkModel<T>&, const Tensor<T>&,              \
      const Segments&);                                                       \
  template Matrix<T> extract_from_tokens(const BasicWatermarkModel<T>&,       \
                                         const PackedTokens&);                \
  template StepOutputs<T> forward_losses(Tape<T>*,                            \
                                         const BasicWatermarkModel<T>&,       \
                                         const StepInputs<T>&);

REMARK_INSTANTIATE_PIPELINE(float)
REMARK_INSTANTIATE_PIPELINE(double)

#undef REMARK_INSTANTIATE_PIPELINE

}  // namespace remark::pipeline
