#include "rlid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "rlid/error.hpp"
#include "rlid/text.hpp"
#include "rlid/train.hpp"

namespace rlid::eval {

namespace {

template <typename T>
Prediction make_prediction_impl(std::span<const T> logits) {
  if (logits.empty()) throw DataError("cannot predict from zero classes");
  std::vector<double> as_double(logits.begin(), logits.end());
  Prediction p;
  p.probabilities = model::softmax<double>(as_double);
  p.label = static_cast<int>(train::argmax(std::span<const double>(as_double)));
  return p;
}

}  // namespace

Prediction make_prediction(std::span<const double> logits) { return make_prediction_impl(logits); }
Prediction make_prediction(std::span<const float> logits) { return make_prediction_impl(logits); }

Prediction predict(const model::ModelParameters& params, const model::ModelConfig& config,
                   const tokenizer::Vocabulary& vocab, std::string_view text) {
  const std::vector<tokenizer::TokenSequence> batch{tokenizer::encode(text, vocab, config.max_len)};
  const auto result = model::forward<float>(params, config, batch, model::Mode::kInfer);
  return make_prediction(result.row(0));
}

Prediction TransformerClassifier::predict(std::string_view text) const {
  return eval::predict(ck_.params, ck_.config, ck_.vocab, text);
}

std::vector<Prediction> TransformerClassifier::predict_batch(const std::vector<std::string>& texts) const {
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(predict(t));
  return out;
}

Metrics Metrics::from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t n = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != n) throw DataError("confusion matrix must be square");
  }
  Metrics m;
  m.confusion = std::move(confusion);
  std::size_t trace = 0;
  std::vector<std::size_t> rows(n, 0), cols(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      rows[i] += m.confusion[i][j];
      cols[j] += m.confusion[i][j];
      m.total += m.confusion[i][j];
    }
    trace += m.confusion[i][i];
  }
  m.accuracy = m.total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(m.total);
  m.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    auto& pc = m.per_class[c];
    const auto hits = static_cast<double>(m.confusion[c][c]);
    pc.support = rows[c];
    pc.predicted = cols[c];
    pc.precision_undefined = cols[c] == 0;
    pc.recall_undefined = rows[c] == 0;
    pc.precision = pc.precision_undefined ? 0.0 : hits / static_cast<double>(cols[c]);
    pc.recall = pc.recall_undefined ? 0.0 : hits / static_cast<double>(rows[c]);
    const double denom = pc.precision + pc.recall;
    pc.f1 = denom == 0.0 ? 0.0 : 2.0 * pc.precision * pc.recall / denom;
  }
  return m;
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size()) throw DataError("truth and predictions differ in length");
  std::vector<std::vector<std::size_t>> confusion(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int id : {truth[i], predicted[i]}) {
      if (id < 0 || static_cast<std::size_t>(id) >= n_classes) {
        throw DataError("label id " + std::to_string(id) + " outside " + std::to_string(n_classes) + " classes");
      }
    }
    ++confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return Metrics::from_confusion(std::move(confusion));
}

Metrics evaluate(const Classifier& classifier, const std::vector<corpus::LabeledSentence>& data,
                 std::size_t n_classes) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  std::vector<int> truth, predicted;
  truth.reserve(data.size());
  predicted.reserve(data.size());
  for (const auto& s : data) {
    if (s.label.id < 0 || static_cast<std::size_t>(s.label.id) >= n_classes) {
      throw DataError("label '" + s.label.name + "' outside the classifier's " + std::to_string(n_classes) +
                      " classes");
    }
    truth.push_back(s.label.id);
    predicted.push_back(classifier(s.text).label);
  }
  return compute_metrics(truth, predicted, n_classes);
}

Metrics evaluate(const model::ModelParameters& params, const model::ModelConfig& config,
                 const tokenizer::Vocabulary& vocab, const std::vector<corpus::LabeledSentence>& data) {
  return evaluate([&](std::string_view text) { return predict(params, config, vocab, text); }, data,
                  config.n_classes);
}

nlohmann::json Metrics::to_json(const LabelSet& labels) const {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& pc = per_class[c];
    per.push_back({{"label", c < labels.size() ? labels[c].name : std::to_string(c)},
                   {"precision", pc.precision},
                   {"recall", pc.recall},
                   {"f1", pc.f1},
                   {"support", pc.support},
                   {"predicted", pc.predicted},
                   {"undefined", pc.undefined()}});
  }
  return nlohmann::json{{"examples", total},
                        {"accuracy", accuracy},
                        {"labels", labels.names()},
                        {"confusion", confusion},
                        {"per_class", per}};
}

std::string Metrics::to_table(const LabelSet& labels) const {
  const std::size_t n = confusion.size();
  auto name = [&](std::size_t c) { return c < labels.size() ? labels[c].name : std::to_string(c); };
  std::size_t width = 10;
  for (std::size_t c = 0; c < n; ++c) width = std::max(width, name(c).size() + 2);
  for (const auto& row : confusion) {
    for (auto v : row) width = std::max(width, std::to_string(v).size() + 2);
  }

  std::ostringstream os;
  os << "confusion (rows = true, columns = predicted)\n";
  os << std::setw(static_cast<int>(width)) << std::left << "" << std::right;
  for (std::size_t c = 0; c < n; ++c) os << std::setw(static_cast<int>(width)) << name(c);
  os << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    os << std::setw(static_cast<int>(width)) << std::left << name(i) << std::right;
    for (std::size_t j = 0; j < n; ++j) os << std::setw(static_cast<int>(width)) << confusion[i][j];
    os << '\n';
  }
  os << '\n' << std::setw(static_cast<int>(width)) << std::left << "label" << std::right << std::setw(11)
     << "precision" << std::setw(11) << "recall" << std::setw(11) << "f1" << std::setw(11) << "support" << '\n';
  os << std::fixed << std::setprecision(4);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& pc = per_class[c];
    os << std::setw(static_cast<int>(width)) << std::left << name(c) << std::right << std::setw(11) << pc.precision
       << std::setw(11) << pc.recall << std::setw(11) << pc.f1 << std::setw(11) << pc.support;
    if (pc.undefined()) os << "  (undefined)";
    os << '\n';
  }
  os << "\naccuracy " << accuracy << " (" << total << " examples)\n";
  return os.str();
}

std::vector<std::string> extract_ngrams(std::string_view raw, std::size_t min_n, std::size_t max_n) {
  std::vector<char32_t> cps{U' '};
  for (char32_t cp : text::decode_utf8(text::normalize(raw))) cps.push_back(cp);
  cps.push_back(U' ');
  std::vector<std::string> out;
  for (std::size_t n = min_n; n <= max_n; ++n) {
    if (n > cps.size()) break;
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      std::string g;
      for (std::size_t k = 0; k < n; ++k) text::append_utf8(g, cps[i + k]);
      out.push_back(std::move(g));
    }
  }
  return out;
}

NgramModel ngram_train(const std::vector<corpus::LabeledSentence>& data, std::size_t n_classes, std::size_t min_n,
                       std::size_t max_n) {
  if (min_n < 1 || min_n > max_n) throw UsageError("n-gram orders must satisfy 1 <= min <= max");
  if (n_classes < 1) throw UsageError("need at least one class");
  NgramModel m;
  m.min_n_ = min_n;
  m.max_n_ = max_n;
  m.class_totals_.assign(n_classes, 0);
  std::vector<std::size_t> docs(n_classes, 0);
  for (const auto& s : data) {
    if (s.label.id < 0 || static_cast<std::size_t>(s.label.id) >= n_classes) {
      throw DataError("label '" + s.label.name + "' outside " + std::to_string(n_classes) + " classes");
    }
    const auto c = static_cast<std::size_t>(s.label.id);
    ++docs[c];
    for (auto& g : extract_ngrams(s.text, min_n, max_n)) {
      auto [it, inserted] = m.counts_.try_emplace(std::move(g));
      if (inserted) it->second.assign(n_classes, 0);
      ++it->second[c];
      ++m.class_totals_[c];
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (docs[c] == 0) throw DataError("class " + std::to_string(c) + " has no training examples");
  }
  m.log_prior_.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    m.log_prior_[c] = std::log(static_cast<double>(docs[c]) / static_cast<double>(data.size()));
  }
  return m;
}

double NgramModel::log_likelihood(std::size_t c, std::string_view ngram) const {
  auto it = counts_.find(ngram);
  const double count = it == counts_.end() ? 0.0 : static_cast<double>(it->second[c]);
  const double denom = static_cast<double>(class_totals_[c] + counts_.size() + 1);
  return std::log((count + 1.0) / denom);
}

Prediction NgramModel::predict(std::string_view text) const {
  std::vector<double> scores(log_prior_);
  for (const auto& g : extract_ngrams(text, min_n_, max_n_)) {
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] += log_likelihood(c, g);
  }
  return make_prediction(scores);
}

}  // namespace rlid::eval
