#include "rlid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rlid/error.hpp"
#include "rlid/random.hpp"

namespace rlid::model {

void ModelConfig::validate() const {
  if (vocab_size < tokenizer::kMinVocabSize) throw UsageError("vocab_size must be at least 5");
  if (hidden_dim == 0 || n_layers == 0 || n_heads == 0 || ff_dim == 0) {
    throw UsageError("model dimensions must be positive");
  }
  if (hidden_dim % n_heads != 0) throw UsageError("hidden_dim must be divisible by n_heads");
  if (max_len < 3) throw UsageError("max_len must be at least 3");
  if (n_classes < 2) throw UsageError("n_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("dropout_rate must lie in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"vocab_size", vocab_size}, {"hidden_dim", hidden_dim}, {"n_layers", n_layers},
                        {"n_heads", n_heads},       {"ff_dim", ff_dim},         {"max_len", max_len},
                        {"n_classes", n_classes},   {"dropout_rate", dropout_rate}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.hidden_dim = doc.at("hidden_dim").get<std::size_t>();
    c.n_layers = doc.at("n_layers").get<std::size_t>();
    c.n_heads = doc.at("n_heads").get<std::size_t>();
    c.ff_dim = doc.at("ff_dim").get<std::size_t>();
    c.max_len = doc.at("max_len").get<std::size_t>();
    c.n_classes = doc.at("n_classes").get<std::size_t>();
    c.dropout_rate = doc.at("dropout_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid model config: ") + e.what());
  }
  return c;
}

namespace {

// Offsets within one encoder layer's block of tensors.
enum LayerSlot : std::size_t {
  kQueryW, kQueryB, kKeyW, kKeyB, kValueW, kValueB, kOutW, kOutB,
  kNorm1Scale, kNorm1Shift, kFfInW, kFfInB, kFfOutW, kFfOutB, kNorm2Scale, kNorm2Shift,
  kSlotsPerLayer
};

constexpr std::size_t kTokenEmbedding = 0;
constexpr std::size_t kPositionEmbedding = 1;
constexpr std::size_t kFirstLayer = 2;

std::size_t layer_slot(std::size_t layer, LayerSlot slot) { return kFirstLayer + layer * kSlotsPerLayer + slot; }
std::size_t classifier_weight(const ModelConfig& c) { return kFirstLayer + c.n_layers * kSlotsPerLayer; }
std::size_t classifier_bias(const ModelConfig& c) { return classifier_weight(c) + 1; }

}  // namespace

std::vector<ParamSpec> parameter_layout(const ModelConfig& c) {
  const std::size_t H = c.hidden_dim;
  const std::size_t F = c.ff_dim;
  std::vector<ParamSpec> specs;
  specs.push_back({"embeddings.token", {c.vocab_size, H}, ParamKind::kMatrix});
  specs.push_back({"embeddings.position", {c.max_len, H}, ParamKind::kMatrix});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      specs.push_back({p + "attention." + proj + ".weight", {H, H}, ParamKind::kMatrix});
      specs.push_back({p + "attention." + proj + ".bias", {H}, ParamKind::kBias});
    }
    specs.push_back({p + "attention_norm.scale", {H}, ParamKind::kNormScale});
    specs.push_back({p + "attention_norm.shift", {H}, ParamKind::kNormShift});
    specs.push_back({p + "ffn.in.weight", {H, F}, ParamKind::kMatrix});
    specs.push_back({p + "ffn.in.bias", {F}, ParamKind::kBias});
    specs.push_back({p + "ffn.out.weight", {F, H}, ParamKind::kMatrix});
    specs.push_back({p + "ffn.out.bias", {H}, ParamKind::kBias});
    specs.push_back({p + "ffn_norm.scale", {H}, ParamKind::kNormScale});
    specs.push_back({p + "ffn_norm.shift", {H}, ParamKind::kNormShift});
  }
  specs.push_back({"classifier.weight", {H, c.n_classes}, ParamKind::kMatrix});
  specs.push_back({"classifier.bias", {c.n_classes}, ParamKind::kBias});
  return specs;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros(const ModelConfig& config) {
  ParameterSet<T> out;
  for (auto& spec : parameter_layout(config)) {
    std::size_t n = 1;
    for (auto d : spec.shape) n *= d;
    out.push_back({spec.name, spec.shape, spec.kind, std::vector<T>(n, T(0))});
  }
  return out;
}

template <typename T>
Tensor<T>& ParameterSet<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("no parameter named '" + name + "'");
  return tensors_[it->second];
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("no parameter named '" + name + "'");
  return tensors_[it->second];
}

template <typename T>
std::size_t ParameterSet<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <typename T>
bool ParameterSet<T>::all_finite() const {
  for (const auto& t : tensors_) {
    for (T x : t.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

template <typename T>
bool ParameterSet<T>::congruent_with(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.shape != b.shape || a.data.size() != b.data.size()) return false;
  }
  return true;
}

template <typename T>
void ParameterSet<T>::push_back(Tensor<T> tensor) {
  if (!index_.emplace(tensor.name, tensors_.size()).second) {
    throw DataError("duplicate parameter name '" + tensor.name + "'");
  }
  tensors_.push_back(std::move(tensor));
}

ModelParameters init_parameters(const ModelConfig& config, uint64_t seed) {
  config.validate();
  auto params = ModelParameters::zeros(config);
  Rng rng(seed);
  for (auto& t : params) {
    switch (t.kind) {
      case ParamKind::kMatrix:
        for (auto& x : t.data) {
          double z = rng.normal();
          while (std::abs(z) > 2.0) z = rng.normal();
          x = static_cast<float>(kInitStddev * z);
        }
        break;
      case ParamKind::kNormScale: std::fill(t.data.begin(), t.data.end(), 1.0f); break;
      case ParamKind::kBias:
      case ParamKind::kNormShift: break;
    }
  }
  return params;
}

template <typename T>
T gelu(T x) {
  const T c = T(0.7978845608028654);  // sqrt(2 / pi)
  const T u = c * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_derivative(T x) {
  const T c = T(0.7978845608028654);
  const T u = c * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(u);
  const T du = c * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t n_classes, std::span<const int> labels) {
  if (n_classes == 0 || logits.size() != labels.size() * n_classes) {
    throw DataError("logits and labels disagree in batch size");
  }
  if (labels.empty()) throw DataError("cross-entropy of an empty batch");
  T total = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= n_classes) {
      throw DataError("label " + std::to_string(labels[b]) + " outside " + std::to_string(n_classes) + " classes");
    }
    const auto row = logits.subspan(b * n_classes, n_classes);
    const T m = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (T z : row) sum += std::exp(z - m);
    total += (m + std::log(sum)) - row[static_cast<std::size_t>(labels[b])];
  }
  return total / static_cast<T>(labels.size());
}

namespace {

// y[n x out] = x[n x in] W[in x out] + b
template <typename T>
void linear(const T* x, std::size_t n, std::size_t in, const T* W, const T* b, std::size_t out, T* y) {
  for (std::size_t i = 0; i < n; ++i) {
    T* yr = y + i * out;
    std::copy(b, b + out, yr);
    const T* xr = x + i * in;
    for (std::size_t p = 0; p < in; ++p) {
      const T xv = xr[p];
      const T* wr = W + p * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
  }
}

// Accumulates dW, db and (when dx != nullptr) overwrites dx for y = x W + b.
template <typename T>
void linear_backward(const T* x, std::size_t n, std::size_t in, const T* W, std::size_t out, const T* dy, T* dW,
                     T* db, T* dx) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyr = dy + i * out;
    const T* xr = x + i * in;
    for (std::size_t j = 0; j < out; ++j) db[j] += dyr[j];
    for (std::size_t p = 0; p < in; ++p) {
      const T xv = xr[p];
      T* dwr = dW + p * out;
      for (std::size_t j = 0; j < out; ++j) dwr[j] += xv * dyr[j];
    }
    if (dx != nullptr) {
      T* dxr = dx + i * in;
      for (std::size_t p = 0; p < in; ++p) {
        const T* wr = W + p * out;
        T acc = 0;
        for (std::size_t j = 0; j < out; ++j) acc += dyr[j] * wr[j];
        dxr[p] = acc;
      }
    }
  }
}

template <typename T>
void layer_norm(const T* x, std::size_t n, std::size_t dim, const T* scale, const T* shift, T* xhat, T* inv_std,
                T* y) {
  const T eps = static_cast<T>(kLayerNormEpsilon);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = x + i * dim;
    T mean = 0;
    for (std::size_t d = 0; d < dim; ++d) mean += xr[d];
    mean /= static_cast<T>(dim);
    T var = 0;
    for (std::size_t d = 0; d < dim; ++d) var += (xr[d] - mean) * (xr[d] - mean);
    var /= static_cast<T>(dim);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t d = 0; d < dim; ++d) {
      const T h = (xr[d] - mean) * is;
      xhat[i * dim + d] = h;
      y[i * dim + d] = scale[d] * h + shift[d];
    }
  }
}

// Overwrites dx; accumulates dscale, dshift.
template <typename T>
void layer_norm_backward(const T* xhat, const T* inv_std, std::size_t n, std::size_t dim, const T* scale,
                         const T* dy, T* dscale, T* dshift, T* dx) {
  std::vector<T> dxhat(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const T* hr = xhat + i * dim;
    const T* dyr = dy + i * dim;
    T mean_d = 0;
    T mean_dh = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      dscale[d] += dyr[d] * hr[d];
      dshift[d] += dyr[d];
      dxhat[d] = dyr[d] * scale[d];
      mean_d += dxhat[d];
      mean_dh += dxhat[d] * hr[d];
    }
    mean_d /= static_cast<T>(dim);
    mean_dh /= static_cast<T>(dim);
    for (std::size_t d = 0; d < dim; ++d) dx[i * dim + d] = inv_std[i] * (dxhat[d] - mean_d - hr[d] * mean_dh);
  }
}

template <typename T>
std::vector<T> dropout_mask(Rng& rng, std::size_t n, double rate) {
  std::vector<T> mask(n);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  return mask;
}

template <typename T>
void apply_mask(std::vector<T>& values, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask[i];
}

void validate_batch(const ModelConfig& config, std::span<const tokenizer::TokenSequence> batch) {
  if (batch.empty()) throw DataError("empty batch");
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    if (seq.ids.size() != config.max_len || seq.mask.size() != config.max_len) {
      throw DataError("sequence " + std::to_string(b) + " has length " + std::to_string(seq.ids.size()) +
                      ", model expects " + std::to_string(config.max_len));
    }
    for (int32_t id : seq.ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
        throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(config.vocab_size));
      }
    }
    if (seq.mask[0] == 0) throw DataError("sequence " + std::to_string(b) + " masks its [CLS] position");
  }
}

template <typename T>
ExampleCache<T> forward_example(const ParameterSet<T>& P, const ModelConfig& c, const tokenizer::TokenSequence& seq,
                                bool train, uint64_t example_seed, T* logits_out) {
  const std::size_t H = c.hidden_dim;
  const std::size_t F = c.ff_dim;
  const std::size_t heads = c.n_heads;
  const std::size_t dh = H / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const bool dropout = train && c.dropout_rate > 0.0;
  Rng rng(example_seed);

  ExampleCache<T> cache;
  std::size_t span = 0;
  for (std::size_t i = 0; i < seq.mask.size(); ++i) {
    if (seq.mask[i]) span = i + 1;
  }
  cache.span = span;
  cache.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(span));
  cache.key_mask.assign(seq.mask.begin(), seq.mask.begin() + static_cast<std::ptrdiff_t>(span));

  std::vector<T> x(span * H);
  const auto& tok = P[kTokenEmbedding].data;
  const auto& pos = P[kPositionEmbedding].data;
  for (std::size_t i = 0; i < span; ++i) {
    const auto id = static_cast<std::size_t>(cache.ids[i]);
    for (std::size_t d = 0; d < H; ++d) x[i * H + d] = tok[id * H + d] + pos[i * H + d];
  }
  if (dropout) {
    cache.embed_drop = dropout_mask<T>(rng, span * H, c.dropout_rate);
    apply_mask(x, cache.embed_drop);
  }

  cache.layers.resize(c.n_layers);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    auto& L = cache.layers[l];
    auto W = [&](LayerSlot s) { return P[layer_slot(l, s)].data.data(); };
    L.input = x;

    L.q.resize(span * H);
    L.k.resize(span * H);
    L.v.resize(span * H);
    linear(x.data(), span, H, W(kQueryW), W(kQueryB), H, L.q.data());
    linear(x.data(), span, H, W(kKeyW), W(kKeyB), H, L.k.data());
    linear(x.data(), span, H, W(kValueW), W(kValueB), H, L.v.data());

    L.probs.assign(heads * span * span, T(0));
    L.context.assign(span * H, T(0));
    std::vector<T> scores(span);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < span; ++i) {
        T m = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < span; ++j) {
          if (!cache.key_mask[j]) {
            scores[j] = -std::numeric_limits<T>::infinity();
            continue;
          }
          T s = 0;
          for (std::size_t d = 0; d < dh; ++d) s += L.q[i * H + h * dh + d] * L.k[j * H + h * dh + d];
          scores[j] = s * scale;
          m = std::max(m, scores[j]);
        }
        T* prow = L.probs.data() + (h * span + i) * span;
        T sum = 0;
        for (std::size_t j = 0; j < span; ++j) {
          prow[j] = cache.key_mask[j] ? std::exp(scores[j] - m) : T(0);
          sum += prow[j];
        }
        for (std::size_t j = 0; j < span; ++j) prow[j] /= sum;
        T* crow = L.context.data() + i * H + h * dh;
        for (std::size_t j = 0; j < span; ++j) {
          const T p = prow[j];
          if (p == T(0)) continue;
          const T* vrow = L.v.data() + j * H + h * dh;
          for (std::size_t d = 0; d < dh; ++d) crow[d] += p * vrow[d];
        }
      }
    }

    std::vector<T> attn(span * H);
    linear(L.context.data(), span, H, W(kOutW), W(kOutB), H, attn.data());
    if (dropout) {
      L.attn_drop = dropout_mask<T>(rng, span * H, c.dropout_rate);
      apply_mask(attn, L.attn_drop);
    }
    for (std::size_t i = 0; i < span * H; ++i) attn[i] += x[i];
    L.norm1_xhat.resize(span * H);
    L.norm1_inv_std.resize(span);
    L.norm1_out.resize(span * H);
    layer_norm(attn.data(), span, H, W(kNorm1Scale), W(kNorm1Shift), L.norm1_xhat.data(), L.norm1_inv_std.data(),
               L.norm1_out.data());

    L.ff_pre.resize(span * F);
    linear(L.norm1_out.data(), span, H, W(kFfInW), W(kFfInB), F, L.ff_pre.data());
    L.ff_act.resize(span * F);
    for (std::size_t i = 0; i < span * F; ++i) L.ff_act[i] = gelu(L.ff_pre[i]);
    std::vector<T> ff(span * H);
    linear(L.ff_act.data(), span, F, W(kFfOutW), W(kFfOutB), H, ff.data());
    if (dropout) {
      L.ff_drop = dropout_mask<T>(rng, span * H, c.dropout_rate);
      apply_mask(ff, L.ff_drop);
    }
    for (std::size_t i = 0; i < span * H; ++i) ff[i] += L.norm1_out[i];
    L.norm2_xhat.resize(span * H);
    L.norm2_inv_std.resize(span);
    L.output.resize(span * H);
    layer_norm(ff.data(), span, H, W(kNorm2Scale), W(kNorm2Shift), L.norm2_xhat.data(), L.norm2_inv_std.data(),
               L.output.data());
    x = L.output;
  }

  cache.pooled.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(H));
  if (dropout) {
    cache.cls_drop = dropout_mask<T>(rng, H, c.dropout_rate);
    apply_mask(cache.pooled, cache.cls_drop);
  }
  linear(cache.pooled.data(), 1, H, P[classifier_weight(c)].data.data(), P[classifier_bias(c)].data.data(),
         c.n_classes, logits_out);
  return cache;
}

template <typename T>
void backward_example(const ParameterSet<T>& P, const ModelConfig& c, const ExampleCache<T>& cache,
                      const T* dlogits, ParameterSet<T>& G) {
  const std::size_t H = c.hidden_dim;
  const std::size_t F = c.ff_dim;
  const std::size_t heads = c.n_heads;
  const std::size_t dh = H / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t span = cache.span;

  std::vector<T> dpooled(H);
  linear_backward(cache.pooled.data(), 1, H, P[classifier_weight(c)].data.data(), c.n_classes, dlogits,
                  G[classifier_weight(c)].data.data(), G[classifier_bias(c)].data.data(), dpooled.data());
  apply_mask(dpooled, cache.cls_drop);

  // Gradient w.r.t. the current layer's output; only [CLS] feeds the head.
  std::vector<T> dx(span * H, T(0));
  std::copy(dpooled.begin(), dpooled.end(), dx.begin());

  std::vector<T> dres(span * H), dff(span * H), dact(span * F), dnorm1(span * H), dattn(span * H), dctx(span * H);
  std::vector<T> dq(span * H), dk(span * H), dv(span * H), dtmp(span * H), dp(span);

  for (std::size_t l = c.n_layers; l-- > 0;) {
    const auto& L = cache.layers[l];
    auto W = [&](LayerSlot s) { return P[layer_slot(l, s)].data.data(); };
    auto dW = [&](LayerSlot s) { return G[layer_slot(l, s)].data.data(); };

    // out = LN2(norm1_out + drop(ffn(norm1_out)))
    layer_norm_backward(L.norm2_xhat.data(), L.norm2_inv_std.data(), span, H, W(kNorm2Scale), dx.data(),
                        dW(kNorm2Scale), dW(kNorm2Shift), dres.data());
    dnorm1 = dres;
    dff = dres;
    apply_mask(dff, L.ff_drop);
    linear_backward(L.ff_act.data(), span, F, W(kFfOutW), H, dff.data(), dW(kFfOutW), dW(kFfOutB), dact.data());
    for (std::size_t i = 0; i < span * F; ++i) dact[i] *= gelu_derivative(L.ff_pre[i]);
    linear_backward(L.norm1_out.data(), span, H, W(kFfInW), F, dact.data(), dW(kFfInW), dW(kFfInB), dtmp.data());
    for (std::size_t i = 0; i < span * H; ++i) dnorm1[i] += dtmp[i];

    // norm1_out = LN1(input + drop(attention(input)))
    layer_norm_backward(L.norm1_xhat.data(), L.norm1_inv_std.data(), span, H, W(kNorm1Scale), dnorm1.data(),
                        dW(kNorm1Scale), dW(kNorm1Shift), dres.data());
    dx = dres;  // residual path to the layer input
    dattn = dres;
    apply_mask(dattn, L.attn_drop);
    linear_backward(L.context.data(), span, H, W(kOutW), H, dattn.data(), dW(kOutW), dW(kOutB), dctx.data());

    std::fill(dq.begin(), dq.end(), T(0));
    std::fill(dk.begin(), dk.end(), T(0));
    std::fill(dv.begin(), dv.end(), T(0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < span; ++i) {
        const T* prow = L.probs.data() + (h * span + i) * span;
        const T* dcrow = dctx.data() + i * H + h * dh;
        T dot = 0;
        for (std::size_t j = 0; j < span; ++j) {
          T acc = 0;
          if (prow[j] != T(0)) {
            const T* vrow = L.v.data() + j * H + h * dh;
            T* dvrow = dv.data() + j * H + h * dh;
            for (std::size_t d = 0; d < dh; ++d) {
              acc += dcrow[d] * vrow[d];
              dvrow[d] += prow[j] * dcrow[d];
            }
          }
          dp[j] = acc;
          dot += prow[j] * acc;
        }
        const T* qrow = L.q.data() + i * H + h * dh;
        T* dqrow = dq.data() + i * H + h * dh;
        for (std::size_t j = 0; j < span; ++j) {
          const T ds = prow[j] * (dp[j] - dot) * scale;
          if (ds == T(0)) continue;
          const T* krow = L.k.data() + j * H + h * dh;
          T* dkrow = dk.data() + j * H + h * dh;
          for (std::size_t d = 0; d < dh; ++d) {
            dqrow[d] += ds * krow[d];
            dkrow[d] += ds * qrow[d];
          }
        }
      }
    }
    linear_backward(L.input.data(), span, H, W(kQueryW), H, dq.data(), dW(kQueryW), dW(kQueryB), dtmp.data());
    for (std::size_t i = 0; i < span * H; ++i) dx[i] += dtmp[i];
    linear_backward(L.input.data(), span, H, W(kKeyW), H, dk.data(), dW(kKeyW), dW(kKeyB), dtmp.data());
    for (std::size_t i = 0; i < span * H; ++i) dx[i] += dtmp[i];
    linear_backward(L.input.data(), span, H, W(kValueW), H, dv.data(), dW(kValueW), dW(kValueB), dtmp.data());
    for (std::size_t i = 0; i < span * H; ++i) dx[i] += dtmp[i];
  }

  apply_mask(dx, cache.embed_drop);
  auto& dtok = G[kTokenEmbedding].data;
  auto& dpos = G[kPositionEmbedding].data;
  for (std::size_t i = 0; i < span; ++i) {
    const auto id = static_cast<std::size_t>(cache.ids[i]);
    for (std::size_t d = 0; d < H; ++d) {
      dtok[id * H + d] += dx[i * H + d];
      dpos[i * H + d] += dx[i * H + d];
    }
  }
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const ParameterSet<T>& params, const ModelConfig& config,
                         std::span<const tokenizer::TokenSequence> batch, Mode mode, uint64_t dropout_seed) {
  validate_batch(config, batch);
  ForwardResult<T> result;
  result.batch_size = batch.size();
  result.n_classes = config.n_classes;
  result.logits.assign(batch.size() * config.n_classes, T(0));
  const bool train = mode == Mode::kTrain;
  if (train) result.caches.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto cache = forward_example(params, config, batch[b], train, derive_seed(dropout_seed, "dropout", b),
                                 result.logits.data() + b * config.n_classes);
    if (train) result.caches.push_back(std::move(cache));
  }
  return result;
}

template <typename T>
std::pair<T, ParameterSet<T>> backward(const ParameterSet<T>& params, const ModelConfig& config,
                                       std::span<const tokenizer::TokenSequence> batch, std::span<const int> labels,
                                       const ForwardResult<T>& cached) {
  if (cached.caches.size() != batch.size() || cached.batch_size != batch.size()) {
    throw UsageError("backward needs the activation cache of a train-mode forward over the same batch");
  }
  if (labels.size() != batch.size()) throw DataError("labels and batch differ in size");
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (cached.caches[b].layers.size() != config.n_layers ||
        cached.caches[b].span > batch[b].ids.size()) {
      throw UsageError("activation cache does not match the model or batch");
    }
  }

  const T loss = cross_entropy<T>(cached.logits, config.n_classes, labels);
  auto grads = ParameterSet<T>::zeros(config);
  const T inv_batch = T(1) / static_cast<T>(batch.size());
  std::vector<T> dlogits(config.n_classes);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto probs = softmax<T>(cached.row(b));
    for (std::size_t k = 0; k < config.n_classes; ++k) {
      dlogits[k] = (probs[k] - (static_cast<int>(k) == labels[b] ? T(1) : T(0))) * inv_batch;
    }
    backward_example(params, config, cached.caches[b], dlogits.data(), grads);
  }
  return {loss, std::move(grads)};
}

#define RLID_INSTANTIATE_MODEL(T)                                                                                  \
  template class ParameterSet<T>;                                                                                  \
  template T gelu<T>(T);                                                                                           \
  template T gelu_derivative<T>(T);                                                                                \
  template std::vector<T> softmax<T>(std::span<const T>);                                                         \
  template T cross_entropy<T>(std::span<const T>, std::size_t, std::span<const int>);                             \
  template ForwardResult<T> forward<T>(const ParameterSet<T>&, const ModelConfig&,                                 \
                                       std::span<const tokenizer::TokenSequence>, Mode, uint64_t);                 \
  template std::pair<T, ParameterSet<T>> backward<T>(const ParameterSet<T>&, const ModelConfig&,                   \
                                                     std::span<const tokenizer::TokenSequence>,                   \
                                                     std::span<const int>, const ForwardResult<T>&);

RLID_INSTANTIATE_MODEL(float)
RLID_INSTANTIATE_MODEL(double)

#undef RLID_INSTANTIATE_MODEL

}  // namespace rlid::model
