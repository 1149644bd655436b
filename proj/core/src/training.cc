#include "remark/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "remark/error.h"
#include "remark/insertion.h"

namespace remark {

using nlohmann::json;

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("train config: " + what);
  };
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(learning_rate >= 0.0, "learning_rate must be non-negative");
  require(optimizer == "adamw", "only the \"adamw\" optimizer is available");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(gumbel_tau > 0.0, "gumbel_tau must be positive");
  require(mask_pct >= 0.0 && mask_pct <= 1.0, "mask_pct must lie in [0, 1]");
  require(w_w >= 0.0 && w_t >= 0.0 && w_w + w_t > 0.0,
          "w_w, w_t must be non-negative with a positive sum");
  require(w_1 >= 0.0 && w_2 >= 0.0 && w_1 + w_2 > 0.0,
          "w_1, w_2 must be non-negative with a positive sum");
  double mix = 0.0;
  for (double p : transform_mix) {
    require(p >= 0.0, "transform_mix entries must be non-negative");
    mix += p;
  }
  require(mix == 0.0 || std::abs(mix - 1.0) < 1e-9,
          "transform_mix must sum to 1 (or be all zeros)");
  require(transform_rate >= 0.0 && transform_rate < 1.0,
          "transform_rate must lie in [0, 1)");
  require(max_tokens >= 1, "max_tokens must be positive");
  require(eval_every >= 1, "eval_every must be at least 1");
  require(eval_samples >= 0, "eval_samples must be non-negative");
}

bool TrainConfig::transforms_enabled() const {
  return transform_mix[0] + transform_mix[1] + transform_mix[2] > 0.0;
}

namespace {

template <typename V>
void read_field(const json& obj, const char* key, V& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<V>();
  } catch (const json::exception&) {
    throw Error(std::string("config field \"") + key + "\" has the wrong type");
  }
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys = {
      "epochs",   "batch_size", "learning_rate",  "optimizer",
      "weight_decay", "gumbel_tau", "mask_pct",   "w_w",
      "w_t",      "w_1",        "w_2",            "transform_mix",
      "transform_rate", "max_tokens", "seed",     "eval_every",
      "eval_samples"};
  return keys;
}

TrainConfig read_train_fields(const json& obj) {
  TrainConfig c;
  read_field(obj, "epochs", c.epochs);
  read_field(obj, "batch_size", c.batch_size);
  read_field(obj, "learning_rate", c.learning_rate);
  read_field(obj, "optimizer", c.optimizer);
  read_field(obj, "weight_decay", c.weight_decay);
  read_field(obj, "gumbel_tau", c.gumbel_tau);
  read_field(obj, "mask_pct", c.mask_pct);
  read_field(obj, "w_w", c.w_w);
  read_field(obj, "w_t", c.w_t);
  read_field(obj, "w_1", c.w_1);
  read_field(obj, "w_2", c.w_2);
  if (obj.contains("transform_mix")) {
    std::vector<double> mix;
    read_field(obj, "transform_mix", mix);
    if (mix.size() != 3) {
      throw Error("transform_mix must hold [replace, drop, add]");
    }
    std::copy(mix.begin(), mix.end(), c.transform_mix.begin());
  }
  read_field(obj, "transform_rate", c.transform_rate);
  read_field(obj, "max_tokens", c.max_tokens);
  read_field(obj, "seed", c.seed);
  read_field(obj, "eval_every", c.eval_every);
  read_field(obj, "eval_samples", c.eval_samples);
  c.validate();
  return c;
}

json parse_object(std::string_view json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw Error("config must be a JSON object");
  return obj;
}

}  // namespace

TrainConfig parse_train_config(std::string_view json_text) {
  const json obj = parse_object(json_text);
  for (const auto& [key, _] : obj.items()) {
    if (!train_keys().contains(key)) {
      throw Error("unknown config key \"" + key + "\"");
    }
  }
  return read_train_fields(obj);
}

RunConfig parse_run_config(std::string_view json_text) {
  static const std::set<std::string> model_keys = {
      "message_bits",     "vocab_size",         "d_model",
      "heads",            "encoder_layers",     "decoder_layers",
      "ff_width",         "extractor_width",    "extractor_heads",
      "extractor_layers", "extractor_ff_width", "init_std",
      "embedding_init_std",
      "model_seed",       "vocab_max_size",     "train_fraction"};
  const json obj = parse_object(json_text);
  json train_part = json::object();
  for (const auto& [key, value] : obj.items()) {
    if (train_keys().contains(key)) {
      train_part[key] = value;
    } else if (!model_keys.contains(key)) {
      throw Error("unknown config key \"" + key + "\"");
    }
  }
  RunConfig run;
  run.train = read_train_fields(train_part);
  auto& m = run.model;
  read_field(obj, "message_bits", m.message_bits);
  read_field(obj, "vocab_size", m.vocab_size);
  read_field(obj, "d_model", m.d_model);
  read_field(obj, "heads", m.heads);
  read_field(obj, "encoder_layers", m.encoder_layers);
  read_field(obj, "decoder_layers", m.decoder_layers);
  read_field(obj, "ff_width", m.ff_width);
  read_field(obj, "extractor_width", m.extractor_width);
  read_field(obj, "extractor_heads", m.extractor_heads);
  read_field(obj, "extractor_layers", m.extractor_layers);
  read_field(obj, "extractor_ff_width", m.extractor_ff_width);
  read_field(obj, "init_std", m.init_std);
  read_field(obj, "embedding_init_std", m.embedding_init_std);
  m.max_tokens = run.train.max_tokens;
  m.seed = run.train.seed;
  read_field(obj, "model_seed", m.seed);
  read_field(obj, "vocab_max_size", run.vocab_max_size);
  read_field(obj, "train_fraction", run.train_fraction);
  if (run.vocab_max_size <= static_cast<int>(Vocabulary::kNumReserved)) {
    throw Error("vocab_max_size must exceed the reserved ids");
  }
  return run;
}

std::string train_config_to_json(const TrainConfig& c) {
  json obj = {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"optimizer", c.optimizer},
      {"weight_decay", c.weight_decay},
      {"gumbel_tau", c.gumbel_tau},
      {"mask_pct", c.mask_pct},
      {"w_w", c.w_w},
      {"w_t", c.w_t},
      {"w_1", c.w_1},
      {"w_2", c.w_2},
      {"transform_mix", c.transform_mix},
      {"transform_rate", c.transform_rate},
      {"max_tokens", c.max_tokens},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"eval_samples", c.eval_samples},
  };
  return obj.dump(2);
}

std::string loss_trace_csv(const std::vector<TrainRecord>& records) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,L_S,L_M,total,heldout_wer\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << r.semantic_loss << ',' << r.message_loss << ','
        << r.total_loss << ',';
    if (std::isnan(r.heldout_wer)) {
      out << "nan";
    } else {
      out << r.heldout_wer;
    }
    out << '\n';
  }
  return out.str();
}

double semantic_loss(const TokenSequence& tokens,
                     const DistributionSequence& distribution) {
  if (static_cast<nn::Index>(tokens.size()) != distribution.rows()) {
    throw Error("semantic_loss: |T| must equal the number of rows");
  }
  if (tokens.empty()) throw Error("semantic_loss: empty sequence");
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= distribution.cols()) {
      throw Error("semantic_loss: token id out of range");
    }
    const double p = distribution(static_cast<nn::Index>(i), tokens[i]);
    sum -= std::log(std::max(p, kProbabilityFloor));
  }
  return sum / static_cast<double>(tokens.size());
}

double message_loss(const BitMessage& message,
                    const std::vector<double>& extracted,
                    const std::vector<double>& extracted_transformed,
                    double w_w, double w_t) {
  if (extracted.size() != message.size() ||
      extracted_transformed.size() != message.size()) {
    throw Error("message_loss: length mismatch");
  }
  double clean = 0.0;
  double transformed = 0.0;
  for (std::size_t i = 0; i < message.size(); ++i) {
    clean += std::abs(message[i] - extracted[i]);
    transformed += std::abs(message[i] - extracted_transformed[i]);
  }
  return w_w * clean + w_t * transformed;
}

double total_loss(double semantic, double message, double w_1, double w_2) {
  return w_1 * semantic + w_2 * message;
}

template <typename T>
AdamW<T>::AdamW(std::vector<nn::NamedTensor<T>> params, double learning_rate,
                double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)),
      lr_(learning_rate),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(nn::Matrix<T>::Zero(p.tensor.rows(), p.tensor.cols()));
    v_.push_back(nn::Matrix<T>::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

template <typename T>
void AdamW<T>::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const T lr = static_cast<T>(lr_);
  const T decay = static_cast<T>(weight_decay_);
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T inv_c1 = static_cast<T>(1.0 / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& tensor = params_[i].tensor;
    auto& value = tensor.mutable_value();
    const auto& grad = tensor.grad();
    auto m = m_[i].array();
    auto v = v_[i].array();
    if (grad.size() == 0) {
      m *= b1;
      v *= b2;
    } else {
      m = b1 * m + (T(1) - b1) * grad.array();
      v = b2 * v + (T(1) - b2) * grad.array().square();
    }
    value.array() -=
        lr * ((m * inv_c1) / ((v * inv_c2).sqrt() + eps) + decay * value.array());
    tensor.zero_grad();
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

pipeline::StepInputs<float> sample_step_inputs(
    const std::vector<TokenSequence>& batch, const ModelConfig& model_config,
    const TrainConfig& config, Rng& rng) {
  pipeline::StepInputs<float> in;
  in.tokens = batch;
  in.tau = static_cast<float>(config.gumbel_tau);
  in.weights = config.loss_weights();

  std::size_t rows = 0;
  std::vector<BitMessage> messages;
  for (const auto& seq : batch) {
    in.masks.push_back(sample_mask(seq.size(), config.mask_pct, rng));
    messages.push_back(BitMessage::random(
        static_cast<std::size_t>(model_config.message_bits), rng));
    rows += seq.size();
  }
  in.messages = pipeline::message_matrix<float>(messages);

  in.noise.resize(static_cast<nn::Index>(rows), model_config.vocab_size);
  for (nn::Index i = 0; i < in.noise.size(); ++i) {
    in.noise.data()[i] = static_cast<float>(rng.gumbel());
  }

  if (!config.transforms_enabled()) {
    for (const auto& seq : batch) {
      in.plans.push_back(pipeline::identity_plan(seq.size()));
    }
    return in;
  }
  // One transform kind per batch, drawn by the configured mix.
  const double u = rng.uniform();
  TransformKind kind = TransformKind::kAdd;
  if (u < config.transform_mix[0]) {
    kind = TransformKind::kReplace;
  } else if (u < config.transform_mix[0] + config.transform_mix[1]) {
    kind = TransformKind::kDrop;
  }
  for (const auto& seq : batch) {
    in.plans.push_back(plan_transform(
        seq.size(), static_cast<std::size_t>(model_config.vocab_size), kind,
        config.transform_rate, rng));
  }
  return in;
}

double heldout_wer(const WatermarkModel& model,
                   const std::vector<TokenSequence>& texts, double mask_pct,
                   std::uint64_t seed) {
  if (texts.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng rng(seed);
  constexpr std::size_t kChunk = 64;
  const auto bits = static_cast<std::size_t>(model.config().message_bits);
  std::size_t matches = 0;
  for (std::size_t start = 0; start < texts.size(); start += kChunk) {
    const std::size_t end = std::min(texts.size(), start + kChunk);
    std::vector<TokenSequence> masked;
    std::vector<BitMessage> messages;
    for (std::size_t i = start; i < end; ++i) {
      masked.push_back(
          apply_mask(texts[i], sample_mask(texts[i].size(), mask_pct, rng)));
      messages.push_back(BitMessage::random(bits, rng));
    }
    const auto packed = pipeline::pack(masked);
    const auto logp = pipeline::watermark_log_probs<float>(
        nullptr, model, packed, pipeline::message_matrix<float>(messages));
    std::vector<TokenSequence> decoded;
    for (const auto& seg : packed.segments) {
      decoded.push_back(greedy_decode(
          logp.value().middleRows(seg.offset, seg.length)));
    }
    const auto probs =
        pipeline::extract_from_tokens<float>(model, pipeline::pack(decoded));
    for (std::size_t b = 0; b < messages.size(); ++b) {
      for (std::size_t j = 0; j < bits; ++j) {
        const std::uint8_t bit =
            probs(static_cast<nn::Index>(b), static_cast<nn::Index>(j)) > 0.5f;
        matches += (bit == messages[b][j]);
      }
    }
  }
  return static_cast<double>(matches) /
         static_cast<double>(texts.size() * bits);
}

TrainResult train_tokens(const WatermarkModel& model,
                         const std::vector<TokenSequence>& train_set,
                         const std::vector<TokenSequence>& test_set,
                         const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw Error("training split is empty");
  for (const auto& seq : train_set) {
    if (seq.empty()) throw Error("training split contains an empty sequence");
  }
  TrainResult result{model.clone(), {}};
  WatermarkModel& net = result.model;
  AdamW<float> optimizer(net.parameters(), config.learning_rate,
                         config.weight_decay);
  Rng rng(config.seed);
  const std::uint64_t eval_seed = Rng::derive(config.seed, 0xe7a1);

  std::vector<TokenSequence> eval_set = test_set;
  if (config.eval_samples > 0 &&
      eval_set.size() > static_cast<std::size_t>(config.eval_samples)) {
    eval_set.resize(static_cast<std::size_t>(config.eval_samples));
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    double sum_s = 0.0, sum_m = 0.0, sum_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<TokenSequence> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size);
           ++i) {
        batch.push_back(train_set[order[i]]);
      }
      auto inputs = sample_step_inputs(batch, net.config(), config, rng);
      nn::Tape<float> tape;
      const auto out = pipeline::forward_losses(&tape, net, inputs);
      const double ls = out.semantic_loss.scalar();
      const double lm = out.message_loss.scalar();
      const double lt = out.total_loss.scalar();
      if (!std::isfinite(ls) || !std::isfinite(lm) || !std::isfinite(lt)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << batches
            << ": L_S=" << ls << " L_M=" << lm << " total=" << lt;
        throw TrainingDiverged(msg.str(), result.records);
      }
      tape.backward(out.total_loss);
      optimizer.step();
      sum_s += ls;
      sum_m += lm;
      sum_total += lt;
      ++batches;
    }
    net.trained_steps = model.trained_steps + optimizer.steps();

    TrainRecord record;
    record.epoch = epoch;
    record.semantic_loss = sum_s / static_cast<double>(batches);
    record.message_loss = sum_m / static_cast<double>(batches);
    record.total_loss = sum_total / static_cast<double>(batches);
    const bool evaluate = epoch % config.eval_every == 0 || epoch == config.epochs;
    record.heldout_wer =
        evaluate ? heldout_wer(net, eval_set, config.mask_pct, eval_seed)
                 : std::numeric_limits<double>::quiet_NaN();
    result.records.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

TrainResult train(const WatermarkModel& model, const Vocabulary& vocab,
                  const Corpus& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (static_cast<int>(vocab.size()) != model.config().vocab_size) {
    throw Error("vocabulary size does not match the model");
  }
  const auto max_len = static_cast<std::size_t>(
      std::min(config.max_tokens, model.config().max_tokens));
  auto tokenize_all = [&](const std::vector<std::string>& texts) {
    std::vector<TokenSequence> out;
    for (const auto& text : texts) {
      auto seq = tokenize(text, vocab, max_len);
      if (!seq.empty()) out.push_back(std::move(seq));
    }
    return out;
  };
  return train_tokens(model, tokenize_all(corpus.train),
                      tokenize_all(corpus.test), config, on_epoch);
}

}  // namespace remark
