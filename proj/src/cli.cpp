#include "rlid/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>

#include "rlid/checkpoint.hpp"
#include "rlid/corpus.hpp"
#include "rlid/error.hpp"
#include "rlid/eval.hpp"
#include "rlid/io.hpp"
#include "rlid/provider.hpp"
#include "rlid/random.hpp"
#include "rlid/tokenizer.hpp"
#include "rlid/train.hpp"
#include "rlid/translit.hpp"

namespace rlid::cli {

namespace {

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

struct Options {
  uint64_t seed = 42;
  std::string labels = "english,hindi,russian";

  // generate
  std::string corpus_path;
  std::string corpus_format = "plain-lines";
  std::size_t column = 0;
  std::vector<std::string> tables;
  std::string pass_through = "keep";
  std::string provider = "fixture";
  std::string fixtures;
  std::string endpoint;
  std::string api_key_env;
  std::string cache_dir;
  int timeout_ms = 10000;
  int retries = 3;
  std::size_t min_chars = 3;
  std::size_t max_chars = 200;
  std::string charset = "any";
  bool no_dedup = false;
  std::string on_provider_error = "abort";
  std::string source_label = "english";

  // split / vocab / train / eval
  std::string data;
  double ratio = 0.8;
  std::string train_out;
  std::string validation_out;
  std::size_t max_vocab = 256;
  std::string vocab;
  std::string train_data;
  std::string validation_data;
  std::string out;
  std::string history;
  model::ModelConfig model;
  train::TrainConfig training;
  std::string checkpoint;
  bool json = false;
  std::string baseline_train;
  std::vector<std::string> texts;
};

std::map<std::string, translit::TransliterationTable> load_tables(const Options& o, const LabelSet& labels) {
  const auto policy = translit::parse_pass_through(o.pass_through);
  std::map<std::string, translit::TransliterationTable> tables;
  for (const auto& spec : o.tables) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw UsageError("--table expects label=path, got '" + spec + "'");
    }
    const std::string label = spec.substr(0, eq);
    if (!labels.find(label)) throw UsageError("--table names unknown label '" + label + "'");
    if (tables.contains(label)) throw UsageError("more than one --table for label '" + label + "'");
    tables.emplace(label, translit::load_table(spec.substr(eq + 1), policy));
  }
  for (const auto& l : labels) {
    if (l.name != o.source_label && !tables.contains(l.name)) {
      throw UsageError("missing --table for label '" + l.name + "'");
    }
  }
  return tables;
}

int cmd_generate(const Options& o, std::ostream& out) {
  const auto labels = LabelSet::parse(o.labels);
  if (!labels.find(o.source_label)) {
    throw UsageError("source label '" + o.source_label + "' is not in the label set " + labels.joined());
  }
  const auto tables = load_tables(o, labels);

  provider::ProviderConfig pc;
  pc.kind = provider::parse_provider_kind(o.provider);
  if (!o.fixtures.empty()) pc.fixture_path = o.fixtures;
  if (!o.endpoint.empty()) pc.endpoint = o.endpoint;
  if (!o.api_key_env.empty()) pc.api_key_env = o.api_key_env;
  if (!o.cache_dir.empty()) pc.cache_dir = o.cache_dir;
  pc.timeout = std::chrono::milliseconds(o.timeout_ms);
  pc.max_retries = o.retries;

  corpus::FilterRules rules;
  rules.min_chars = o.min_chars;
  rules.max_chars = o.max_chars;
  rules.allowed_charset = corpus::parse_charset(o.charset);
  rules.dedup = !o.no_dedup;
  rules.validate();

  corpus::GenerateOptions options;
  options.source_label = o.source_label;
  if (o.on_provider_error == "abort") {
    options.on_provider_error = corpus::OnProviderError::kAbort;
  } else if (o.on_provider_error == "skip") {
    options.on_provider_error = corpus::OnProviderError::kSkip;
  } else {
    throw UsageError("--on-provider-error must be abort or skip");
  }

  const auto raw = corpus::load_corpus(o.corpus_path, corpus::parse_corpus_format(o.corpus_format), o.column);
  const auto kept = corpus::filter_sentences(raw, rules);
  auto provider = provider::make_provider(pc);
  const auto result = corpus::generate_dataset(kept, labels, *provider, tables, options);
  corpus::write_dataset(result.pairs, o.out);

  out << "corpus " << raw.size() << " records, " << kept.size() << " after filtering\n";
  for (const auto& l : labels) {
    const auto id = static_cast<std::size_t>(l.id);
    out << l.name << ' ' << result.stats.produced[id] << " produced, " << result.stats.dropped_empty[id]
        << " dropped empty, " << result.stats.provider_failures[id] << " provider failures\n";
  }
  out << "stripped characters " << result.stats.stripped_chars << '\n';
  out << "wrote " << result.pairs.size() << " records to " << o.out << '\n';
  return 0;
}

int cmd_split(const Options& o, std::ostream& out) {
  const auto labels = LabelSet::parse(o.labels);
  const auto pairs = corpus::read_dataset(o.data, labels);
  const auto split = corpus::split_dataset(pairs, o.ratio, derive_seed(o.seed, "split"));
  corpus::write_dataset(split.train, o.train_out);
  corpus::write_dataset(split.validation, o.validation_out);
  out << "train " << split.train.size() << " records to " << o.train_out << '\n';
  out << "validation " << split.validation.size() << " records to " << o.validation_out << '\n';
  return 0;
}

int cmd_vocab(const Options& o, std::ostream& out) {
  const auto labels = LabelSet::parse(o.labels);
  const auto pairs = corpus::read_dataset(o.data, labels);
  const auto vocab = tokenizer::build_vocab(pairs, o.max_vocab);
  vocab.save(o.out);
  out << "vocabulary " << vocab.size() << " tokens to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto labels = LabelSet::parse(o.labels);
  corpus::DatasetSplit split;
  split.train = corpus::read_dataset(o.train_data, labels);
  if (!o.validation_data.empty()) split.validation = corpus::read_dataset(o.validation_data, labels);
  const auto vocab = tokenizer::Vocabulary::load(o.vocab);

  model::ModelConfig config = o.model;
  config.vocab_size = vocab.size();
  config.n_classes = labels.size();
  config.validate();
  train::TrainConfig tc = o.training;
  tc.seed = derive_seed(o.seed, "train");
  tc.validate();

  auto params = model::init_parameters(config, derive_seed(o.seed, "init"));
  const auto result = train::train(std::move(params), config, tc, split, vocab, [&](const train::EpochRecord& r) {
    out << "epoch " << r.epoch << '/' << tc.epochs << " steps " << r.steps << " loss " << fixed4(r.mean_loss);
    if (r.has_validation) out << " validation_accuracy " << fixed4(r.validation_accuracy);
    out << '\n' << std::flush;
  });

  train::save_checkpoint(result.params, config, vocab, labels, o.out);
  if (!o.history.empty()) {
    nlohmann::json doc{{"model", config.to_json()},
                       {"train", tc.to_json()},
                       {"seed", o.seed},
                       {"history", result.history.to_json()}};
    io::write_file(o.history, doc.dump(2) + "\n");
  }
  out << "checkpoint " << o.out << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const eval::TransformerClassifier classifier(train::load_checkpoint(o.checkpoint));
  const auto& labels = classifier.labels();
  const auto data = corpus::read_dataset(o.data, labels);
  const auto metrics =
      eval::evaluate([&](std::string_view t) { return classifier.predict(t); }, data, labels.size());

  nlohmann::json doc = metrics.to_json(labels);
  std::string baseline_text;
  if (!o.baseline_train.empty()) {
    const auto baseline = eval::ngram_train(corpus::read_dataset(o.baseline_train, labels), labels.size());
    const auto bm = eval::evaluate([&](std::string_view t) { return baseline.predict(t); }, data, labels.size());
    std::size_t agree = 0;
    for (const auto& s : data) agree += classifier.predict(s.text).label == baseline.predict(s.text).label;
    const double agreement = static_cast<double>(agree) / static_cast<double>(data.size());
    doc["baseline"] = {{"accuracy", bm.accuracy}, {"agreement", agreement}};
    baseline_text = "baseline accuracy " + fixed4(bm.accuracy) + "\nagreement " + fixed4(agreement) + '\n';
  }

  if (o.json) {
    out << doc.dump(2) << '\n';
  } else {
    out << metrics.to_table(labels) << baseline_text;
  }
  return 0;
}

int cmd_predict(const Options& o, std::istream& in, std::ostream& out) {
  const eval::TransformerClassifier classifier(train::load_checkpoint(o.checkpoint));
  auto emit = [&](const std::string& line) {
    const auto p = classifier.predict(line);
    out << classifier.labels()[static_cast<std::size_t>(p.label)].name << ' '
        << fixed4(p.probabilities[static_cast<std::size_t>(p.label)]) << '\n';
  };
  if (!o.texts.empty()) {
    for (const auto& t : o.texts) emit(t);
    return 0;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    emit(line);
  }
  return 0;
}

int cmd_inspect(const Options& o, std::ostream& out) {
  const std::string bytes = io::read_file(o.checkpoint);
  const auto ck = train::load_checkpoint(o.checkpoint);  // full validation first
  const auto header = nlohmann::json::parse(train::read_checkpoint_header(bytes));
  out << "checkpoint " << o.checkpoint << " (" << bytes.size() << " bytes, format version "
      << train::kCheckpointVersion << ")\n";
  out << "config " << ck.config.to_json().dump() << '\n';
  out << "labels " << ck.labels.joined() << '\n';
  out << "vocabulary " << ck.vocab.size() << " tokens\n";
  out << "tensors " << ck.params.size() << ", parameters " << ck.params.element_count() << '\n';
  std::size_t width = 0;
  for (const auto& t : header.at("tensors")) width = std::max(width, t.at("name").get<std::string>().size());
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    out << name << std::string(width + 2 - name.size(), ' ') << shape_string(t.at("shape")) << " offset "
        << t.at("offset").get<std::size_t>() << " length " << t.at("length").get<std::size_t>() << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Language identification for romanized text", "rlid"};
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file; [subcommand] sections hold that command's flags");
  app.add_option("--seed", o.seed, "Master seed; each stage derives its own")->capture_default_str();
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Build a labeled dataset from an English corpus");
  gen->add_option("--corpus", o.corpus_path, "Source corpus file")->required();
  gen->add_option("--corpus-format", o.corpus_format, "plain-lines or tsv-column")->capture_default_str();
  gen->add_option("--column", o.column, "0-based column for tsv-column")->capture_default_str();
  gen->add_option("--labels", o.labels, "Comma-separated label set")->capture_default_str();
  gen->add_option("--table", o.tables, "label=path transliteration table (repeatable)");
  gen->add_option("--pass-through", o.pass_through, "keep, drop or error")->capture_default_str();
  gen->add_option("--provider", o.provider, "fixture or http")->capture_default_str();
  gen->add_option("--fixtures", o.fixtures, "Fixture translations TSV");
  gen->add_option("--endpoint", o.endpoint, "HTTP provider URL");
  gen->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
  gen->add_option("--cache-dir", o.cache_dir, "Translation cache directory");
  gen->add_option("--timeout-ms", o.timeout_ms, "HTTP timeout")->capture_default_str();
  gen->add_option("--retries", o.retries, "HTTP retries")->capture_default_str();
  gen->add_option("--min-chars", o.min_chars)->capture_default_str();
  gen->add_option("--max-chars", o.max_chars)->capture_default_str();
  gen->add_option("--charset", o.charset, "any or romanized")->capture_default_str();
  gen->add_flag("--no-dedup", o.no_dedup, "Keep duplicate sentences");
  gen->add_option("--on-provider-error", o.on_provider_error, "abort or skip")->capture_default_str();
  gen->add_option("--source-label", o.source_label, "Label of the untranslated corpus")->capture_default_str();
  gen->add_option("--out", o.out, "Dataset TSV to write")->required();

  auto* split = app.add_subcommand("split", "Shuffle a dataset into train and validation files");
  split->add_option("--data", o.data)->required();
  split->add_option("--labels", o.labels)->capture_default_str();
  split->add_option("--ratio", o.ratio, "Train fraction")->capture_default_str();
  split->add_option("--train-out", o.train_out)->required();
  split->add_option("--validation-out", o.validation_out)->required();

  auto* vocab = app.add_subcommand("vocab", "Build a character vocabulary from a dataset");
  vocab->add_option("--data", o.data)->required();
  vocab->add_option("--labels", o.labels)->capture_default_str();
  vocab->add_option("--max-size", o.max_vocab, "Including the 4 special tokens")->capture_default_str();
  vocab->add_option("--out", o.out)->required();

  auto* tr = app.add_subcommand("train", "Train the transformer classifier");
  tr->add_option("--train", o.train_data)->required();
  tr->add_option("--validation", o.validation_data);
  tr->add_option("--vocab", o.vocab)->required();
  tr->add_option("--labels", o.labels)->capture_default_str();
  tr->add_option("--hidden-dim", o.model.hidden_dim)->capture_default_str();
  tr->add_option("--layers", o.model.n_layers)->capture_default_str();
  tr->add_option("--heads", o.model.n_heads)->capture_default_str();
  tr->add_option("--ff-dim", o.model.ff_dim)->capture_default_str();
  tr->add_option("--max-len", o.model.max_len)->capture_default_str();
  tr->add_option("--dropout", o.model.dropout_rate)->capture_default_str();
  tr->add_option("--lr", o.training.learning_rate)->capture_default_str();
  tr->add_option("--epochs", o.training.epochs)->capture_default_str();
  tr->add_option("--batch-size", o.training.batch_size)->capture_default_str();
  tr->add_option("--weight-decay", o.training.weight_decay)->capture_default_str();
  tr->add_option("--out", o.out, "Checkpoint to write")->required();
  tr->add_option("--history", o.history, "Also write the training history as JSON");

  auto* ev = app.add_subcommand("eval", "Report metrics of a checkpoint on a dataset");
  ev->add_option("--checkpoint", o.checkpoint)->required();
  ev->add_option("--data", o.data)->required();
  ev->add_flag("--json", o.json, "Print the report as JSON");
  ev->add_option("--baseline-train", o.baseline_train, "Also fit the n-gram baseline on this dataset");

  auto* pr = app.add_subcommand("predict", "Classify --text values or stdin lines");
  pr->add_option("--checkpoint", o.checkpoint)->required();
  pr->add_option("--text", o.texts, "Input text (repeatable); stdin is read when absent");

  auto* in_cmd = app.add_subcommand("inspect", "Print a checkpoint's header and tensor manifest");
  in_cmd->add_option("--checkpoint", o.checkpoint)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::kUsage);
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    if (split->parsed()) return cmd_split(o, out);
    if (vocab->parsed()) return cmd_vocab(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (ev->parsed()) return cmd_eval(o, out);
    if (pr->parsed()) return cmd_predict(o, in, out);
    if (in_cmd->parsed()) return cmd_inspect(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::kData);
  }
  return static_cast<int>(ErrorCategory::kUsage);
}

}  // namespace rlid::cli
