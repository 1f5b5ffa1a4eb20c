#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rlid/tokenizer.hpp"

// A small BERT-style encoder classifier with an explicit forward pass and
// exact hand-derived gradients.
//
//   x = dropout(token_embedding[ids] + position_embedding)
//   per layer (post-norm):
//     x = LayerNorm(x + dropout(MultiHeadSelfAttention(x, mask)))
//     x = LayerNorm(x + dropout(W2 * gelu(W1 * x + b1) + b2))
//   logits = dropout(x[CLS]) * Wc + bc
//
// Weights are stored [in x out] row-major so that y = x W + b.
namespace rlid::model {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ff_dim = 128;
  std::size_t max_len = 64;
  std::size_t n_classes = 3;
  double dropout_rate = 0.1;

  // UsageError unless hidden_dim % n_heads == 0, n_classes >= 2,
  // vocab_size >= 5, max_len >= 3, 0 <= dropout_rate < 1, all sizes > 0.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kLayerNormEpsilon = 1e-12;
inline constexpr double kInitStddev = 0.02;

enum class ParamKind { kMatrix, kBias, kNormScale, kNormShift };

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  ParamKind kind;
};

// Names, shapes and kinds of every parameter array, in storage order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& config);

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  ParamKind kind = ParamKind::kMatrix;
  std::vector<T> data;

  std::size_t size() const { return data.size(); }
};

// Named flat arrays in the order given by parameter_layout.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  static ParameterSet zeros(const ModelConfig& config);

  std::size_t size() const { return tensors_.size(); }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t element_count() const;
  bool all_finite() const;
  // Same names and shapes.
  bool congruent_with(const ParameterSet& other) const;

  void push_back(Tensor<T> tensor);

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& t : tensors_) {
      out.push_back({t.name, t.shape, t.kind, std::vector<U>(t.data.begin(), t.data.end())});
    }
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
      const auto& x = a.tensors_[i];
      const auto& y = b.tensors_[i];
      if (x.name != y.name || x.shape != y.shape || x.kind != y.kind || x.data != y.data) return false;
    }
    return true;
  }

 private:
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ModelParameters = ParameterSet<float>;
using Gradients = ParameterSet<float>;

// Weights ~ N(0, 0.02) truncated at +-2 sigma (resampled), biases 0, norm
// scales 1, shifts 0. Bit-identical for a given seed.
ModelParameters init_parameters(const ModelConfig& config, uint64_t seed);

enum class Mode { kTrain, kInfer };

// Activations of one example, kept for the backward pass. Only the first
// `span` positions (through the last unmasked one) are computed: positions
// after it never influence earlier ones, and masked keys inside the span get
// zero attention weight.
template <typename T>
struct LayerCache {
  std::vector<T> input;       // span x hidden
  std::vector<T> q, k, v;     // span x hidden
  std::vector<T> probs;       // heads x span x span
  std::vector<T> context;     // span x hidden
  std::vector<T> attn_drop;   // span x hidden multipliers, empty when inactive
  std::vector<T> norm1_xhat;  // span x hidden
  std::vector<T> norm1_inv_std;
  std::vector<T> norm1_out;   // span x hidden
  std::vector<T> ff_pre;      // span x ff
  std::vector<T> ff_act;      // span x ff
  std::vector<T> ff_drop;     // span x hidden multipliers, empty when inactive
  std::vector<T> norm2_xhat;
  std::vector<T> norm2_inv_std;
  std::vector<T> output;      // span x hidden
};

template <typename T>
struct ExampleCache {
  std::size_t span = 0;
  std::vector<int32_t> ids;       // span
  std::vector<uint8_t> key_mask;  // span
  std::vector<T> embed_drop;      // span x hidden multipliers, empty when inactive
  std::vector<LayerCache<T>> layers;
  std::vector<T> cls_drop;        // hidden multipliers, empty when inactive
  std::vector<T> pooled;          // hidden, after dropout
};

template <typename T>
struct ForwardResult {
  std::size_t batch_size = 0;
  std::size_t n_classes = 0;
  std::vector<T> logits;                // batch x n_classes
  std::vector<ExampleCache<T>> caches;  // one per example in train mode, empty in infer mode

  std::span<const T> row(std::size_t b) const {
    return std::span<const T>(logits).subspan(b * n_classes, n_classes);
  }
};

// Dropout masks are drawn per example from derive_seed(dropout_seed, "dropout", b).
// DataError on shape mismatch, out-of-range ids or an unmasked [CLS].
template <typename T>
ForwardResult<T> forward(const ParameterSet<T>& params, const ModelConfig& config,
                         std::span<const tokenizer::TokenSequence> batch, Mode mode, uint64_t dropout_seed = 0);

// Max-subtracted softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

// Mean over the batch of -log softmax(row)[label]. DataError when a label is
// out of range.
template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t n_classes, std::span<const int> labels);

// Exact gradient of the mean cross-entropy for the batch `forward` ran on in
// train mode; dropout masks are replayed from the cache.
template <typename T>
std::pair<T, ParameterSet<T>> backward(const ParameterSet<T>& params, const ModelConfig& config,
                                       std::span<const tokenizer::TokenSequence> batch, std::span<const int> labels,
                                       const ForwardResult<T>& cached);

template <typename T>
T gelu(T x);
template <typename T>
T gelu_derivative(T x);

}  // namespace rlid::model
