#include "remark/model.h"

#include <cmath>
#include <string>

#include "remark/error.h"
#include "remark/pipeline.h"

namespace remark {

BitMessage::BitMessage(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw Error("message bits must be 0 or 1");
  }
}

BitMessage BitMessage::parse(std::string_view bits) {
  std::vector<std::uint8_t> out;
  out.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') {
      throw Error("message must be a string of 0/1 characters");
    }
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return BitMessage(std::move(out));
}

BitMessage BitMessage::random(std::size_t length, Rng& rng) {
  std::vector<std::uint8_t> bits(length);
  for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return BitMessage(std::move(bits));
}

BitMessage BitMessage::complement() const {
  std::vector<std::uint8_t> out(bits_);
  for (auto& b : out) b ^= 1;
  return BitMessage(std::move(out));
}

std::string BitMessage::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s += static_cast<char>('0' + b);
  return s;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("model config: ") + what);
  };
  require(vocab_size > static_cast<int>(Vocabulary::kNumReserved),
          "vocab_size must exceed the reserved ids");
  require(message_bits > 0, "message_bits must be positive");
  require(max_tokens > 0, "max_tokens must be positive");
  require(d_model > 0 && heads > 0 && d_model % heads == 0,
          "d_model must be a positive multiple of heads");
  require(encoder_layers >= 0 && decoder_layers >= 0,
          "layer counts must be non-negative");
  require(ff_width > 0, "ff_width must be positive");
  require(extractor_width > 0 && extractor_heads > 0 &&
              extractor_width % extractor_heads == 0,
          "extractor_width must be a positive multiple of extractor_heads");
  require(extractor_layers >= 0, "extractor_layers must be non-negative");
  require(extractor_ff_width > 0, "extractor_ff_width must be positive");
  require(init_std > 0.0, "init_std must be positive");
  require(embedding_init_std > 0.0, "embedding_init_std must be positive");
}

namespace {

enum class ParamKind { kWeight, kBias, kGain };

template <typename T, typename F>
void visit_layer_norm(nn::LayerNormParams<T>& p, const std::string& prefix,
                      F&& f) {
  f(prefix + ".gain", p.gain, ParamKind::kGain);
  f(prefix + ".bias", p.bias, ParamKind::kBias);
}

template <typename T, typename F>
void visit_attention(nn::AttentionParams<T>& p, const std::string& prefix,
                     F&& f) {
  f(prefix + ".wq", p.wq, ParamKind::kWeight);
  f(prefix + ".bq", p.bq, ParamKind::kBias);
  f(prefix + ".wk", p.wk, ParamKind::kWeight);
  f(prefix + ".bk", p.bk, ParamKind::kBias);
  f(prefix + ".wv", p.wv, ParamKind::kWeight);
  f(prefix + ".bv", p.bv, ParamKind::kBias);
  f(prefix + ".wo", p.wo, ParamKind::kWeight);
  f(prefix + ".bo", p.bo, ParamKind::kBias);
}

template <typename T, typename F>
void visit_ffn(nn::FeedForwardParams<T>& p, const std::string& prefix, F&& f) {
  f(prefix + ".w1", p.w1, ParamKind::kWeight);
  f(prefix + ".b1", p.b1, ParamKind::kBias);
  f(prefix + ".w2", p.w2, ParamKind::kWeight);
  f(prefix + ".b2", p.b2, ParamKind::kBias);
}

template <typename T, typename F>
void visit_encoder_layer(nn::EncoderLayerParams<T>& p,
                         const std::string& prefix, F&& f) {
  visit_layer_norm(p.norm1, prefix + ".norm1", f);
  visit_attention(p.self_attn, prefix + ".self_attn", f);
  visit_layer_norm(p.norm2, prefix + ".norm2", f);
  visit_ffn(p.ffn, prefix + ".ffn", f);
}

// Visits every parameter slot in registration order; that order is the
// checkpoint order and the initialization order.
template <typename T, typename F>
void visit(BasicWatermarkModel<T>& m, F&& f) {
  f("token_embedding", m.token_embedding, ParamKind::kWeight);
  f("position_embedding", m.position_embedding, ParamKind::kWeight);
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    visit_encoder_layer(m.encoder[i], "encoder." + std::to_string(i), f);
  }
  visit_layer_norm(m.shared_norm, "shared_norm", f);
  f("message.w", m.message_w, ParamKind::kWeight);
  f("message.b", m.message_b, ParamKind::kBias);
  for (std::size_t i = 0; i < m.decoder.size(); ++i) {
    const std::string prefix = "decoder." + std::to_string(i);
    auto& p = m.decoder[i];
    visit_layer_norm(p.norm1, prefix + ".norm1", f);
    visit_attention(p.self_attn, prefix + ".self_attn", f);
    visit_layer_norm(p.norm2, prefix + ".norm2", f);
    visit_attention(p.cross_attn, prefix + ".cross_attn", f);
    visit_layer_norm(p.norm3, prefix + ".norm3", f);
    visit_ffn(p.ffn, prefix + ".ffn", f);
  }
  visit_layer_norm(m.decoder_norm, "decoder_norm", f);
  f("mapper.w", m.mapper_w, ParamKind::kWeight);
  f("mapper.b", m.mapper_b, ParamKind::kBias);
  for (std::size_t i = 0; i < m.extractor.size(); ++i) {
    visit_encoder_layer(m.extractor[i], "extractor." + std::to_string(i), f);
  }
  visit_layer_norm(m.extractor_norm, "extractor_norm", f);
  f("head.w", m.head_w, ParamKind::kWeight);
  f("head.b", m.head_b, ParamKind::kBias);
}

template <typename T>
nn::Tensor<T> zeros(nn::Index rows, nn::Index cols) {
  return nn::Tensor<T>(nn::Matrix<T>::Zero(rows, cols), true);
}

template <typename T>
void allocate_layer_norm(nn::LayerNormParams<T>& p, int width) {
  p.gain = zeros<T>(1, width);
  p.bias = zeros<T>(1, width);
}

template <typename T>
void allocate_attention(nn::AttentionParams<T>& p, int width) {
  for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = zeros<T>(width, width);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = zeros<T>(1, width);
}

template <typename T>
void allocate_ffn(nn::FeedForwardParams<T>& p, int width, int hidden) {
  p.w1 = zeros<T>(width, hidden);
  p.b1 = zeros<T>(1, hidden);
  p.w2 = zeros<T>(hidden, width);
  p.b2 = zeros<T>(1, width);
}

template <typename T>
void allocate_encoder_layer(nn::EncoderLayerParams<T>& p, int width,
                            int hidden) {
  allocate_layer_norm(p.norm1, width);
  allocate_attention(p.self_attn, width);
  allocate_layer_norm(p.norm2, width);
  allocate_ffn(p.ffn, width, hidden);
}

template <typename T>
void allocate(BasicWatermarkModel<T>& m, const ModelConfig& c) {
  const int d = c.d_model;
  m.token_embedding = zeros<T>(c.vocab_size, d);
  m.position_embedding = zeros<T>(c.max_tokens, d);
  m.encoder.assign(static_cast<std::size_t>(c.encoder_layers), {});
  for (auto& layer : m.encoder) allocate_encoder_layer(layer, d, c.ff_width);
  allocate_layer_norm(m.shared_norm, d);
  m.message_w = zeros<T>(c.message_bits, d);
  m.message_b = zeros<T>(1, d);
  m.decoder.assign(static_cast<std::size_t>(c.decoder_layers), {});
  for (auto& layer : m.decoder) {
    allocate_layer_norm(layer.norm1, d);
    allocate_attention(layer.self_attn, d);
    allocate_layer_norm(layer.norm2, d);
    allocate_attention(layer.cross_attn, d);
    allocate_layer_norm(layer.norm3, d);
    allocate_ffn(layer.ffn, d, c.ff_width);
  }
  allocate_layer_norm(m.decoder_norm, d);
  m.mapper_w = zeros<T>(c.vocab_size, c.extractor_width);
  m.mapper_b = zeros<T>(1, c.extractor_width);
  m.extractor.assign(static_cast<std::size_t>(c.extractor_layers), {});
  for (auto& layer : m.extractor) {
    allocate_encoder_layer(layer, c.extractor_width, c.extractor_ff_width);
  }
  allocate_layer_norm(m.extractor_norm, c.extractor_width);
  m.head_w = zeros<T>(c.extractor_width, c.message_bits);
  m.head_b = zeros<T>(1, c.message_bits);
}

}  // namespace

template <typename T>
BasicWatermarkModel<T>::BasicWatermarkModel(const ModelConfig& config)
    : config_(config) {
  config_.validate();
  allocate(*this, config_);
  Rng rng(config_.seed);
  const T std_dev = static_cast<T>(config_.init_std);
  const T embedding_std = static_cast<T>(config_.embedding_init_std);
  visit(*this, [&](const std::string& name, nn::Tensor<T>& t, ParamKind kind) {
    auto& v = t.mutable_value();
    switch (kind) {
      case ParamKind::kGain:
        v.setOnes();
        break;
      case ParamKind::kBias:
        v.setZero();
        break;
      case ParamKind::kWeight: {
        const T sd = name == "token_embedding" ? embedding_std : std_dev;
        for (nn::Index i = 0; i < v.size(); ++i) {
          v.data()[i] = static_cast<T>(rng.normal()) * sd;
        }
        break;
      }
    }
  });
}

template <typename T>
std::vector<nn::NamedTensor<T>> BasicWatermarkModel<T>::parameters() const {
  std::vector<nn::NamedTensor<T>> out;
  // Tensors are shared handles; visiting a const model through a copy keeps
  // the same storage.
  auto& self = const_cast<BasicWatermarkModel<T>&>(*this);
  visit(self, [&](const std::string& name, nn::Tensor<T>& t, ParamKind) {
    out.push_back({name, t});
  });
  return out;
}

template <typename T>
std::size_t BasicWatermarkModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) {
    n += static_cast<std::size_t>(p.tensor.value().size());
  }
  return n;
}

template <typename T>
template <typename U>
BasicWatermarkModel<U> BasicWatermarkModel<T>::cast() const {
  BasicWatermarkModel<U> out;
  out.config_ = config_;
  out.trained_steps = trained_steps;
  allocate(out, config_);
  const auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i].tensor.mutable_value() = src[i].tensor.value().template cast<U>();
  }
  return out;
}

template class BasicWatermarkModel<float>;
template class BasicWatermarkModel<double>;
template BasicWatermarkModel<float> BasicWatermarkModel<float>::cast<float>() const;
template BasicWatermarkModel<double> BasicWatermarkModel<float>::cast<double>() const;
template BasicWatermarkModel<float> BasicWatermarkModel<double>::cast<float>() const;
template BasicWatermarkModel<double> BasicWatermarkModel<double>::cast<double>() const;

// ---------------------------------------------------------------------------
// Single-sequence inference API.

namespace {

void check_ids(const WatermarkModel& model, const TokenSequence& tokens) {
  if (tokens.empty()) throw Error("token sequence is empty");
  for (TokenId id : tokens) {
    if (id < 0 || id >= model.config().vocab_size) {
      throw Error("token id out of range");
    }
  }
}

void check_tokens(const WatermarkModel& model, const TokenSequence& tokens) {
  check_ids(model, tokens);
  if (tokens.size() > static_cast<std::size_t>(model.config().max_tokens)) {
    throw Error("token sequence exceeds max_tokens");
  }
}

void check_message(const WatermarkModel& model, const BitMessage& message) {
  if (static_cast<int>(message.size()) != model.config().message_bits) {
    throw Error("message length " + std::to_string(message.size()) +
                " does not match the model's " +
                std::to_string(model.config().message_bits) + " bits");
  }
}

nn::Segments single_segment(nn::Index rows) { return {{0, rows}}; }

}  // namespace

LatentSequence encode_text(const WatermarkModel& model,
                           const TokenSequence& tokens) {
  check_tokens(model, tokens);
  const auto packed = pipeline::pack({tokens});
  return pipeline::encode<float>(nullptr, model, packed).value();
}

nn::Matrix<float> embed_message(const WatermarkModel& model,
                                const BitMessage& message) {
  check_message(model, message);
  return pipeline::embed_messages<float>(
             nullptr, model, pipeline::message_matrix<float>({message}))
      .value();
}

LatentSequence fuse(const LatentSequence& text_latents,
                    const nn::Matrix<float>& message_latent) {
  if (message_latent.rows() != 1 ||
      message_latent.cols() != text_latents.cols()) {
    throw Error("fuse: width mismatch");
  }
  LatentSequence out = text_latents;
  out.rowwise() += message_latent.row(0);
  return out;
}

DistributionSequence decode_distribution(const WatermarkModel& model,
                                         const LatentSequence& fused) {
  if (fused.rows() == 0) throw Error("decode: empty latent sequence");
  if (fused.cols() != model.config().d_model) {
    throw Error("decode: latent width mismatch");
  }
  nn::Tensor<float> input(fused);
  const auto logp = pipeline::decode_log_probs<float>(
      nullptr, model, input, single_segment(fused.rows()));
  return logp.value().array().exp().matrix();
}

DistributionSequence gumbel_softmax(const DistributionSequence& dist,
                                    double tau, const nn::Matrix<float>& noise) {
  if (!(tau > 0.0)) throw Error("gumbel_softmax: tau must be positive");
  if (noise.rows() != dist.rows() || noise.cols() != dist.cols()) {
    throw Error("gumbel_softmax: noise shape mismatch");
  }
  // Evaluated in double so the tempered softmax keeps full float accuracy.
  DistributionSequence out(dist.rows(), dist.cols());
  for (nn::Index r = 0; r < dist.rows(); ++r) {
    Eigen::ArrayXd z(dist.cols());
    for (nn::Index c = 0; c < dist.cols(); ++c) {
      const double p = std::max(static_cast<double>(dist(r, c)), kProbabilityFloor);
      z(c) = (std::log(p) + static_cast<double>(noise(r, c))) / tau;
    }
    z = (z - z.maxCoeff()).exp();
    z /= z.sum();
    out.row(r) = z.cast<float>().matrix().transpose();
  }
  return out;
}

DistributionSequence gumbel_softmax(const DistributionSequence& dist,
                                    double tau, Rng& rng) {
  nn::Matrix<float> noise(dist.rows(), dist.cols());
  for (nn::Index i = 0; i < noise.size(); ++i) {
    noise.data()[i] = static_cast<float>(rng.gumbel());
  }
  return gumbel_softmax(dist, tau, noise);
}

const char* transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::kDrop:
      return "drop";
    case TransformKind::kAdd:
      return "add";
    case TransformKind::kReplace:
      return "replace";
  }
  return "?";
}

TransformPlan plan_transform(std::size_t rows, std::size_t vocab_size,
                             TransformKind kind, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("transform rate must lie in [0, 1)");
  }
  if (vocab_size <= Vocabulary::kNumReserved) {
    throw Error("transform: vocabulary has no regular tokens");
  }
  const std::size_t regular = vocab_size - Vocabulary::kNumReserved;
  auto random_token = [&] {
    return static_cast<std::int32_t>(Vocabulary::kNumReserved +
                                     rng.index(regular));
  };
  TransformPlan plan;
  plan.sources.reserve(rows + rows / 4 + 1);
  plan.onehot.reserve(rows + rows / 4 + 1);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = static_cast<nn::Index>(i);
    switch (kind) {
      case TransformKind::kDrop:
        if (!rng.bernoulli(rate)) {
          plan.sources.push_back(row);
          plan.onehot.push_back(-1);
        }
        break;
      case TransformKind::kAdd:
        plan.sources.push_back(row);
        plan.onehot.push_back(-1);
        if (rng.bernoulli(rate)) {
          plan.sources.push_back(-1);
          plan.onehot.push_back(random_token());
        }
        break;
      case TransformKind::kReplace:
        if (rng.bernoulli(rate)) {
          plan.sources.push_back(-1);
          plan.onehot.push_back(random_token());
        } else {
          plan.sources.push_back(row);
          plan.onehot.push_back(-1);
        }
        break;
    }
  }
  if (plan.sources.empty() && rows > 0) {
    // Dropping never empties a sequence.
    plan.sources.push_back(static_cast<nn::Index>(rng.index(rows)));
    plan.onehot.push_back(-1);
  }
  return plan;
}

DistributionSequence transform_distribution(const DistributionSequence& dist,
                                            TransformKind kind, double rate,
                                            Rng& rng) {
  const auto plan = plan_transform(static_cast<std::size_t>(dist.rows()),
                                   static_cast<std::size_t>(dist.cols()), kind,
                                   rate, rng);
  nn::Tensor<float> input(dist);
  return nn::select_rows<float>(nullptr, input, plan.sources, plan.onehot)
      .value();
}

EmbeddedSequence map_embedding(const WatermarkModel& model,
                               const DistributionSequence& dist) {
  if (dist.cols() != model.config().vocab_size) {
    throw Error("map_embedding: row width must equal |V|");
  }
  nn::Tensor<float> input(dist);
  return pipeline::map_embedding<float>(nullptr, model, input).value();
}

BitMessage threshold_bits(const std::vector<double>& probabilities) {
  std::vector<std::uint8_t> bits(probabilities.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = probabilities[i] > 0.5 ? 1 : 0;
  }
  return BitMessage(std::move(bits));
}

namespace {

Extraction to_extraction(const nn::Matrix<float>& probs_row) {
  Extraction e;
  e.probabilities.resize(static_cast<std::size_t>(probs_row.cols()));
  for (nn::Index j = 0; j < probs_row.cols(); ++j) {
    e.probabilities[static_cast<std::size_t>(j)] = probs_row(0, j);
  }
  e.bits = threshold_bits(e.probabilities);
  return e;
}

}  // namespace

Extraction extract(const WatermarkModel& model,
                   const EmbeddedSequence& embedded) {
  if (embedded.rows() == 0) throw Error("extract: empty sequence");
  if (embedded.cols() != model.config().extractor_width) {
    throw Error("extract: embedding width mismatch");
  }
  nn::Tensor<float> input(embedded);
  const auto probs = pipeline::extract_probabilities<float>(
      nullptr, model, input, single_segment(embedded.rows()));
  return to_extraction(probs.value());
}

DistributionSequence watermark_distribution(const WatermarkModel& model,
                                            const TokenSequence& masked_tokens,
                                            const BitMessage& message) {
  check_tokens(model, masked_tokens);
  check_message(model, message);
  const auto packed = pipeline::pack({masked_tokens});
  const auto logp = pipeline::watermark_log_probs<float>(
      nullptr, model, packed, pipeline::message_matrix<float>({message}));
  return logp.value().array().exp().matrix();
}

Extraction extract_tokens(const WatermarkModel& model,
                          const TokenSequence& tokens) {
  check_ids(model, tokens);
  const auto probs = pipeline::extract_from_tokens<float>(
      model, pipeline::pack({tokens}));
  return to_extraction(probs);
}

}  // namespace remark
