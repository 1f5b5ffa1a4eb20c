#include "rlid/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlid/error.hpp"
#include "rlid/random.hpp"

namespace rlid::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be positive");
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw UsageError("AdamW betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw UsageError("AdamW epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"learning_rate", learning_rate}, {"epochs", epochs},   {"batch_size", batch_size},
                        {"seed", seed},                   {"beta1", beta1},     {"beta2", beta2},
                        {"epsilon", epsilon},             {"weight_decay", weight_decay}};
}

OptimizerState OptimizerState::zeros_like(const model::ParameterSet<float>& params) {
  OptimizerState state;
  for (const auto& t : params) {
    state.m.push_back({t.name, t.shape, t.kind, std::vector<float>(t.size(), 0.0f)});
    state.v.push_back({t.name, t.shape, t.kind, std::vector<float>(t.size(), 0.0f)});
  }
  return state;
}

void adamw_step(model::ParameterSet<float>& params, const model::ParameterSet<float>& grads, OptimizerState& state,
                const TrainConfig& config) {
  if (!params.congruent_with(grads)) throw DataError("gradients do not match the parameter shapes");
  if (state.m.size() == 0 && state.v.size() == 0 && state.step == 0) state = OptimizerState::zeros_like(params);
  if (!params.congruent_with(state.m) || !params.congruent_with(state.v)) {
    throw DataError("optimizer state does not match the parameter shapes");
  }
  for (const auto& g : grads) {
    for (float x : g.data) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in parameter '" + g.name + "'");
    }
  }

  const uint64_t t = state.step + 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double lr = config.learning_rate;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    const double decay = params[i].kind == model::ParamKind::kMatrix ? config.weight_decay : 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj / correction1;
      const double v_hat = vj / correction2;
      const double th = theta[j];
      theta[j] = static_cast<float>(th - lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + decay * th));
    }
  }
  state.step = t;
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json rec{{"epoch", e.epoch}, {"steps", e.steps}, {"mean_loss", e.mean_loss}};
    if (e.has_validation) rec["validation_accuracy"] = e.validation_accuracy;
    epochs_json.push_back(rec);
  }
  return nlohmann::json{{"epochs", epochs_json}, {"total_steps", total_steps}};
}

template <typename T>
std::size_t argmax_impl(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t argmax(std::span<const float> values) { return argmax_impl(values); }
std::size_t argmax(std::span<const double> values) { return argmax_impl(values); }

double accuracy(const model::ModelParameters& params, const model::ModelConfig& config,
                const std::vector<tokenizer::TokenSequence>& inputs, const std::vector<int>& labels) {
  if (inputs.empty()) return 0.0;
  constexpr std::size_t kChunk = 64;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, inputs.size() - start);
    const auto result = model::forward<float>(params, config, std::span(inputs).subspan(start, n), model::Mode::kInfer);
    for (std::size_t b = 0; b < n; ++b) {
      if (static_cast<int>(argmax(result.row(b))) == labels[start + b]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

namespace {

void encode_all(const std::vector<corpus::LabeledSentence>& data, const tokenizer::Vocabulary& vocab,
                const model::ModelConfig& config, std::vector<tokenizer::TokenSequence>& inputs,
                std::vector<int>& labels) {
  inputs.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& s : data) {
    if (s.label.id < 0 || static_cast<std::size_t>(s.label.id) >= config.n_classes) {
      throw DataError("label '" + s.label.name + "' outside the model's " + std::to_string(config.n_classes) +
                      " classes");
    }
    inputs.push_back(tokenizer::encode(s.text, vocab, config.max_len));
    labels.push_back(s.label.id);
  }
}

}  // namespace

TrainResult train(model::ModelParameters params, const model::ModelConfig& config, const TrainConfig& train_config,
                  const corpus::DatasetSplit& dataset, const tokenizer::Vocabulary& vocab,
                  const EpochCallback& on_epoch) {
  config.validate();
  train_config.validate();
  if (dataset.train.empty()) throw DataError("the training split is empty");
  if (vocab.size() != config.vocab_size) {
    throw DataError("vocabulary has " + std::to_string(vocab.size()) + " tokens but the model expects " +
                    std::to_string(config.vocab_size));
  }
  if (!params.congruent_with(model::ModelParameters::zeros(config))) {
    throw DataError("parameters do not match the model config");
  }

  std::vector<tokenizer::TokenSequence> train_inputs, val_inputs;
  std::vector<int> train_labels, val_labels;
  encode_all(dataset.train, vocab, config, train_inputs, train_labels);
  encode_all(dataset.validation, vocab, config, val_inputs, val_labels);

  TrainResult result;
  auto state = OptimizerState::zeros_like(params);
  const std::size_t n = train_inputs.size();
  std::vector<tokenizer::TokenSequence> batch;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(train_config.seed ^ epoch).shuffle(order);

    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += train_config.batch_size) {
      const std::size_t size = std::min(train_config.batch_size, n - start);
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = 0; i < size; ++i) {
        batch.push_back(train_inputs[order[start + i]]);
        batch_labels.push_back(train_labels[order[start + i]]);
      }
      const uint64_t step_seed = derive_seed(train_config.seed, "dropout", result.history.total_steps);
      const auto fwd = model::forward<float>(params, config, batch, model::Mode::kTrain, step_seed);
      auto [loss, grads] = model::backward<float>(params, config, batch, batch_labels, fwd);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.history.total_steps + 1));
      }
      adamw_step(params, grads, state, train_config);
      loss_sum += static_cast<double>(loss) * static_cast<double>(size);
      ++record.steps;
      ++result.history.total_steps;
    }
    record.mean_loss = loss_sum / static_cast<double>(n);
    if (!val_inputs.empty()) {
      record.validation_accuracy = accuracy(params, config, val_inputs, val_labels);
      record.has_validation = true;
    }
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  if (!params.all_finite()) throw NumericError("training produced non-finite parameters");
  result.params = std::move(params);
  return result;
}

}  // namespace rlid::train
