#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rlid/checkpoint.hpp"
#include "rlid/corpus.hpp"
#include "rlid/labels.hpp"
#include "rlid/model.hpp"
#include "rlid/tokenizer.hpp"

namespace rlid::eval {

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;  // per class id, sums to 1
};

// Softmax over `logits` plus argmax with the lowest id winning ties.
Prediction make_prediction(std::span<const double> logits);
Prediction make_prediction(std::span<const float> logits);

// encode -> forward (infer) -> softmax -> argmax.
Prediction predict(const model::ModelParameters& params, const model::ModelConfig& config,
                   const tokenizer::Vocabulary& vocab, std::string_view text);

class TransformerClassifier {
 public:
  explicit TransformerClassifier(train::Checkpoint checkpoint) : ck_(std::move(checkpoint)) {}

  Prediction predict(std::string_view text) const;
  std::vector<Prediction> predict_batch(const std::vector<std::string>& texts) const;
  const LabelSet& labels() const { return ck_.labels; }
  const train::Checkpoint& checkpoint() const { return ck_; }

 private:
  train::Checkpoint ck_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // row sum
  std::size_t predicted = 0;  // column sum
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool undefined() const { return precision_undefined || recall_undefined; }
};

struct Metrics {
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;

  // Square, non-negative counts. Divisions by zero are reported as 0 and
  // flagged.
  static Metrics from_confusion(std::vector<std::vector<std::size_t>> confusion);

  nlohmann::json to_json(const LabelSet& labels) const;
  // Aligned confusion table plus per-class lines, accuracy to 4 decimals.
  std::string to_table(const LabelSet& labels) const;
};

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

using Classifier = std::function<Prediction(std::string_view)>;

// DataError when a label id is outside [0, n_classes) or `data` is empty.
Metrics evaluate(const Classifier& classifier, const std::vector<corpus::LabeledSentence>& data, std::size_t n_classes);
Metrics evaluate(const model::ModelParameters& params, const model::ModelConfig& config,
                 const tokenizer::Vocabulary& vocab, const std::vector<corpus::LabeledSentence>& data);

// Multinomial Naive Bayes over character n-grams (orders min_n..max_n) of
// " " + normalize(text) + " ", with add-one smoothing. The event space is the
// set of n-grams seen in training plus one catch-all for unseen n-grams, so
// each class distribution is a proper probability distribution.
class NgramModel {
 public:
  std::size_t min_order() const { return min_n_; }
  std::size_t max_order() const { return max_n_; }
  std::size_t n_classes() const { return log_prior_.size(); }
  std::size_t vocabulary_size() const { return counts_.size(); }
  double log_prior(std::size_t c) const { return log_prior_[c]; }
  // log P(ngram | class) with the smoothed floor for unseen n-grams.
  double log_likelihood(std::size_t c, std::string_view ngram) const;

  Prediction predict(std::string_view text) const;

  friend bool operator==(const NgramModel&, const NgramModel&) = default;

 private:
  friend NgramModel ngram_train(const std::vector<corpus::LabeledSentence>&, std::size_t, std::size_t, std::size_t);

  std::size_t min_n_ = 1;
  std::size_t max_n_ = 3;
  std::vector<double> log_prior_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> counts_;  // n-gram -> per-class count
  std::vector<std::size_t> class_totals_;
};

std::vector<std::string> extract_ngrams(std::string_view text, std::size_t min_n, std::size_t max_n);

// DataError when some class in [0, n_classes) has no examples.
NgramModel ngram_train(const std::vector<corpus::LabeledSentence>& data, std::size_t n_classes,
                       std::size_t min_n = 1, std::size_t max_n = 3);

}  // namespace rlid::eval
