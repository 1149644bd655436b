#ifndef REMARK_TRAINING_H_
#define REMARK_TRAINING_H_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "remark/corpus.h"
#include "remark/error.h"
#include "remark/model.h"
#include "remark/pipeline.h"

namespace remark {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 16;
  double learning_rate = 3e-5;
  std::string optimizer = "adamw";
  double weight_decay = 0.01;
  double gumbel_tau = 0.3;
  double mask_pct = 0.5;
  double w_w = 0.7;
  double w_t = 0.3;
  double w_1 = 0.5;
  double w_2 = 0.5;
  // Probabilities of replace / drop / add for the transformed path. All
  // zeros disables the transforms (the transformed path sees the relaxed distribution as is).
  std::array<double, 3> transform_mix = {0.33, 0.33, 0.34};
  double transform_rate = 0.1;
  int max_tokens = 80;
  std::uint64_t seed = 0;
  // Held-out WER is measured every `eval_every` epochs on at most
  // `eval_samples` test sequences (0 = all); other epochs record NaN.
  int eval_every = 1;
  int eval_samples = 0;

  void validate() const;
  pipeline::LossWeights loss_weights() const { return {w_w, w_t, w_1, w_2}; }
  bool transforms_enabled() const;
};

// Flat JSON object with the TrainConfig field names; unknown keys throw.
TrainConfig parse_train_config(std::string_view json_text);
std::string train_config_to_json(const TrainConfig& config);

// A run config is one flat JSON object carrying both the TrainConfig keys
// and the architecture keys of ModelConfig (message_bits, vocab_size,
// d_model, heads, encoder_layers, decoder_layers, ff_width, extractor_width,
// extractor_heads, extractor_layers, extractor_ff_width, init_std, embedding_init_std,
// model_seed). max_tokens is shared; model_seed defaults to seed. Unknown
// keys throw. vocab_size of 0 means "size of the built vocabulary".
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  int vocab_max_size = 8000;
  double train_fraction = 0.8;
};
RunConfig parse_run_config(std::string_view json_text);

struct TrainRecord {
  int epoch = 0;
  double semantic_loss = 0.0;
  double message_loss = 0.0;
  double total_loss = 0.0;
  double heldout_wer = 0.0;
};

// CSV with header "epoch,L_S,L_M,total,heldout_wer".
std::string loss_trace_csv(const std::vector<TrainRecord>& records);

// Mean over positions of -log S[i, T_i]. Throws on length mismatch.
double semantic_loss(const TokenSequence& tokens,
                     const DistributionSequence& distribution);

// w_w * L1(message, extracted) + w_t * L1(message, extracted_transformed).
double message_loss(const BitMessage& message,
                    const std::vector<double>& extracted,
                    const std::vector<double>& extracted_transformed,
                    double w_w, double w_t);

// w_1 * semantic + w_2 * message.
double total_loss(double semantic, double message, double w_1, double w_2);

// Decoupled-weight-decay Adam.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<nn::NamedTensor<T>> params, double learning_rate,
        double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  // Applies one update from the accumulated gradients, then clears them.
  void step();
  void zero_grad();
  std::int64_t steps() const { return steps_; }

 private:
  std::vector<nn::NamedTensor<T>> params_;
  std::vector<nn::Matrix<T>> m_, v_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::int64_t steps_ = 0;
};

// Draws masks, messages, Gumbel noise and transform plans for one batch.
pipeline::StepInputs<float> sample_step_inputs(
    const std::vector<TokenSequence>& batch, const ModelConfig& model_config,
    const TrainConfig& config, Rng& rng);

// Held-out WER: greedy argmax decode of the masked-text distribution for fresh random
// messages, then extraction from the decoded tokens.
double heldout_wer(const WatermarkModel& model,
                   const std::vector<TokenSequence>& texts, double mask_pct,
                   std::uint64_t seed);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<TrainRecord> records)
      : Error(what), records(std::move(records)) {}
  std::vector<TrainRecord> records;
};

struct TrainResult {
  WatermarkModel model;
  std::vector<TrainRecord> records;
};

using EpochCallback = std::function<void(const TrainRecord&)>;

// End-to-end training. The input model is not modified.
TrainResult train(const WatermarkModel& model, const Vocabulary& vocab,
                  const Corpus& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Same over pre-tokenized splits.
TrainResult train_tokens(const WatermarkModel& model,
                         const std::vector<TokenSequence>& train_set,
                         const std::vector<TokenSequence>& test_set,
                         const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

}  // namespace remark

#endif  // REMARK_TRAINING_H_
