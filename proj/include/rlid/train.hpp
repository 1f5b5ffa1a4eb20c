#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "rlid/corpus.hpp"
#include "rlid/model.hpp"
#include "rlid/tokenizer.hpp"

namespace rlid::train {

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 4;
  uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;  // UsageError on out-of-range values
  nlohmann::json to_json() const;
};

struct OptimizerState {
  uint64_t step = 0;
  model::ParameterSet<float> m;
  model::ParameterSet<float> v;

  static OptimizerState zeros_like(const model::ParameterSet<float>& params);
};

// One AdamW update in place. Weight decay is decoupled and applied to matrix
// parameters only (biases and norm parameters are exempt). DataError on shape
// mismatch, NumericError naming the parameter on a non-finite gradient.
void adamw_step(model::ParameterSet<float>& params, const model::ParameterSet<float>& grads, OptimizerState& state,
                const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double mean_loss = 0.0;  // example-weighted over the epoch
  double validation_accuracy = 0.0;
  bool has_validation = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t total_steps = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  model::ModelParameters params;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Per epoch: shuffle the training split with Rng(seed ^ epoch), run
// forward/backward/adamw_step over consecutive batches (the last one may be
// short), then measure validation accuracy. Deterministic for fixed inputs.
TrainResult train(model::ModelParameters params, const model::ModelConfig& config, const TrainConfig& train_config,
                  const corpus::DatasetSplit& dataset, const tokenizer::Vocabulary& vocab,
                  const EpochCallback& on_epoch = {});

// Fraction of `data` whose argmax prediction (lowest id on ties) matches the
// label.
double accuracy(const model::ModelParameters& params, const model::ModelConfig& config,
                const std::vector<tokenizer::TokenSequence>& inputs, const std::vector<int>& labels);

// Index of the largest value; the lowest index wins ties.
std::size_t argmax(std::span<const float> values);
std::size_t argmax(std::span<const double> values);

}  // namespace rlid::train
