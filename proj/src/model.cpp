#include "vqlatent/model.hpp"

#include <cmath>
#include <map>

#include "vqlatent/errors.hpp"
#include "vqlatent/ops.hpp"

namespace vql {

using namespace ad;

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecialIds)) throw ContractError("model: vocab_size too small");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ContractError("model: d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
  }
  if (d_ff == 0 || max_len < 2) throw ContractError("model: d_ff must be positive and max_len at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractError("model: dropout_rate must lie in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},       {"n_heads", c.n_heads},
                        {"n_layers_enc", c.n_layers_enc}, {"n_layers_dec", c.n_layers_dec}, {"d_ff", c.d_ff},
                        {"max_len", c.max_len},       {"dropout_rate", c.dropout_rate}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers_enc = j.value("n_layers_enc", c.n_layers_enc);
  c.n_layers_dec = j.value("n_layers_dec", c.n_layers_dec);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_len = j.value("max_len", c.max_len);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  return c;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParams<T>::named() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("embed", token_embedding);
  auto add_attn = [&out](const std::string& prefix, const AttentionWeights<T>& a) {
    out.emplace_back(prefix + ".wq", a.wq);
    out.emplace_back(prefix + ".wk", a.wk);
    out.emplace_back(prefix + ".wv", a.wv);
    out.emplace_back(prefix + ".wo", a.wo);
  };
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string p = "enc." + std::to_string(i);
    out.emplace_back(p + ".attn_norm", encoder[i].attn_norm);
    add_attn(p + ".attn", encoder[i].attn);
    out.emplace_back(p + ".ff_norm", encoder[i].ff_norm);
    out.emplace_back(p + ".ff_in", encoder[i].ff_in);
    out.emplace_back(p + ".ff_out", encoder[i].ff_out);
  }
  out.emplace_back("enc.norm", encoder_norm);
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const std::string p = "dec." + std::to_string(i);
    out.emplace_back(p + ".self_norm", decoder[i].self_norm);
    add_attn(p + ".self", decoder[i].self_attn);
    out.emplace_back(p + ".cross_norm", decoder[i].cross_norm);
    add_attn(p + ".cross", decoder[i].cross_attn);
    out.emplace_back(p + ".ff_norm", decoder[i].ff_norm);
    out.emplace_back(p + ".ff_in", decoder[i].ff_in);
    out.emplace_back(p + ".ff_out", decoder[i].ff_out);
  }
  out.emplace_back("dec.norm", decoder_norm);
  out.emplace_back("out.weight", out_weight);
  out.emplace_back("out.bias", out_bias);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::list() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

namespace {

template <typename T>
Tensor<T> normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> data(shape_numel(shape));
  for (T& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(data), true);
}

template <typename T>
Tensor<T> ones(std::size_t n) {
  return Tensor<T>::full({n}, T(1), true);
}

template <typename T>
AttentionWeights<T> init_attention(std::size_t d, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {normal_tensor<T>({d, d}, s, rng), normal_tensor<T>({d, d}, s, rng), normal_tensor<T>({d, d}, s, rng),
          normal_tensor<T>({d, d}, s, rng)};
}

// Templated visitor over every tensor slot so that init, conversion and
// loading share one layout definition with `named()`.
template <typename T, typename Fn>
void for_each_slot(ModelParams<T>& p, const ModelConfig& c, Fn&& fn) {
  const std::size_t d = c.d_model, f = c.d_ff, v = c.vocab_size;
  fn("embed", p.token_embedding, Shape{v, d});
  auto attn = [&](const std::string& prefix, AttentionWeights<T>& a) {
    fn(prefix + ".wq", a.wq, Shape{d, d});
    fn(prefix + ".wk", a.wk, Shape{d, d});
    fn(prefix + ".wv", a.wv, Shape{d, d});
    fn(prefix + ".wo", a.wo, Shape{d, d});
  };
  p.encoder.resize(c.n_layers_enc);
  for (std::size_t i = 0; i < c.n_layers_enc; ++i) {
    const std::string pre = "enc." + std::to_string(i);
    auto& L = p.encoder[i];
    fn(pre + ".attn_norm", L.attn_norm, Shape{d});
    attn(pre + ".attn", L.attn);
    fn(pre + ".ff_norm", L.ff_norm, Shape{d});
    fn(pre + ".ff_in", L.ff_in, Shape{d, f});
    fn(pre + ".ff_out", L.ff_out, Shape{f, d});
  }
  fn("enc.norm", p.encoder_norm, Shape{d});
  p.decoder.resize(c.n_layers_dec);
  for (std::size_t i = 0; i < c.n_layers_dec; ++i) {
    const std::string pre = "dec." + std::to_string(i);
    auto& L = p.decoder[i];
    fn(pre + ".self_norm", L.self_norm, Shape{d});
    attn(pre + ".self", L.self_attn);
    fn(pre + ".cross_norm", L.cross_norm, Shape{d});
    attn(pre + ".cross", L.cross_attn);
    fn(pre + ".ff_norm", L.ff_norm, Shape{d});
    fn(pre + ".ff_in", L.ff_in, Shape{d, f});
    fn(pre + ".ff_out", L.ff_out, Shape{f, d});
  }
  fn("dec.norm", p.decoder_norm, Shape{d});
  fn("out.weight", p.out_weight, Shape{d, v});
  fn("out.bias", p.out_bias, Shape{v});
}

bool is_norm(const std::string& name) {
  return name.ends_with("norm");
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  ModelParams<T> p;
  for_each_slot(p, config, [&rng](const std::string& name, Tensor<T>& slot, const Shape& shape) {
    if (is_norm(name)) {
      slot = ones<T>(shape[0]);
    } else if (name == "out.bias") {
      slot = Tensor<T>::zeros(shape, true);
    } else if (name == "embed") {
      slot = normal_tensor<T>(shape, 1.0, rng);
    } else {
      slot = normal_tensor<T>(shape, 1.0 / std::sqrt(static_cast<double>(shape[0])), rng);
    }
  });
  return p;
}

template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& params) {
  std::vector<std::pair<std::string, Tensor<To>>> named;
  for (const auto& [name, t] : params.named()) {
    Tensor<To> c = cast<To>(t);
    c.set_requires_grad(true);
    named.emplace_back(name, c);
  }
  ModelConfig shape_only;
  shape_only.vocab_size = params.token_embedding.dim(0);
  shape_only.d_model = params.token_embedding.dim(1);
  shape_only.n_layers_enc = params.encoder.size();
  shape_only.n_layers_dec = params.decoder.size();
  shape_only.d_ff = params.encoder.empty() ? params.decoder.at(0).ff_in.dim(1) : params.encoder[0].ff_in.dim(1);
  shape_only.n_heads = 1;
  return params_from_named<To>(shape_only, named);
}

template <typename T>
ModelParams<T> params_from_named(const ModelConfig& config,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& named) {
  std::map<std::string, Tensor<T>> by_name(named.begin(), named.end());
  ModelParams<T> p;
  for_each_slot(p, config, [&by_name](const std::string& name, Tensor<T>& slot, const Shape& shape) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InputError("model: missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("model: tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                       shape_str(shape));
    }
    slot = it->second;
    slot.set_requires_grad(true);
  });
  return p;
}

template <typename T>
Tensor<T> positional_encoding(std::size_t length, std::size_t width) {
  std::vector<T> pe(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(width));
      pe[pos * width + i] = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < width) pe[pos * width + i + 1] = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return Tensor<T>({length, width}, std::move(pe));
}

namespace {

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const ModelConfig& c, const RunOptions& opts) {
  if (opts.mode != Mode::train || c.dropout_rate == 0.0) return x;
  if (!opts.rng) throw ContractError("model: train-mode dropout requires an rng");
  return dropout(x, static_cast<T>(c.dropout_rate), *opts.rng);
}

template <typename T>
Tensor<T> causal_mask(std::size_t n) {
  std::vector<T> m(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = T(-1e9);
  return Tensor<T>({n, n}, std::move(m));
}

template <typename T>
Tensor<T> multi_head(const Tensor<T>& queries_in, const Tensor<T>& memory, const AttentionWeights<T>& w,
                     std::size_t heads, bool causal) {
  const Tensor<T> q = matmul(queries_in, w.wq);
  const Tensor<T> k = matmul(memory, w.wk);
  const Tensor<T> v = matmul(memory, w.wv);
  const std::size_t d = q.dim(1);
  const std::size_t dh = d / heads;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  Tensor<T> mask;
  if (causal) mask = causal_mask<T>(q.dim(0));
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
    const Tensor<T> kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
    const Tensor<T> vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
    Tensor<T> scores = scale(matmul(qh, transpose(kh)), inv);
    if (causal) scores = add(scores, mask);
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  const Tensor<T> joined = heads == 1 ? outs[0] : concat_cols(outs);
  return matmul(joined, w.wo);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const Tensor<T>& w_in, const Tensor<T>& w_out) {
  return matmul(relu(matmul(x, w_in)), w_out);
}

void check_ids(std::span<const TokenId> ids, const ModelConfig& c, const char* what) {
  if (ids.empty()) throw InputError(std::string(what) + ": empty token sequence");
  if (ids.size() > c.max_len) {
    throw InputError(std::string(what) + ": sequence of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                     std::to_string(c.max_len));
  }
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw InputError(std::string(what) + ": token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(c.vocab_size));
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> encode(std::span<const TokenId> ids, const ModelParams<T>& params, const ModelConfig& config,
                 RunOptions opts) {
  check_ids(ids, config, "encode");
  Tensor<T> x = add(embedding(params.token_embedding, ids), positional_encoding<T>(ids.size(), config.d_model));
  x = maybe_dropout(x, config, opts);
  for (const auto& layer : params.encoder) {
    const Tensor<T> h = layer_norm(x, layer.attn_norm);
    x = add(x, maybe_dropout(multi_head(h, h, layer.attn, config.n_heads, false), config, opts));
    const Tensor<T> f = layer_norm(x, layer.ff_norm);
    x = add(x, maybe_dropout(feed_forward(f, layer.ff_in, layer.ff_out), config, opts));
  }
  return layer_norm(x, params.encoder_norm);
}

template <typename T>
Tensor<T> embed_decoder_inputs(std::span<const TokenId> ids, const ModelParams<T>& params, const ModelConfig& config) {
  check_ids(ids, config, "decode");
  return add(embedding(params.token_embedding, ids), positional_encoding<T>(ids.size(), config.d_model));
}

template <typename T>
Tensor<T> decode_embedded(const Tensor<T>& latents, const Tensor<T>& inputs, const ModelParams<T>& params,
                          const ModelConfig& config, RunOptions opts) {
  if (latents.rank() != 2 || latents.dim(1) != config.d_model) {
    throw ShapeError("decode: latent shape " + shape_str(latents.shape()) + " does not have width d_model=" +
                     std::to_string(config.d_model));
  }
  if (inputs.rank() != 2 || inputs.dim(1) != config.d_model) {
    throw ShapeError("decode: decoder input shape " + shape_str(inputs.shape()) + " does not match d_model");
  }
  Tensor<T> x = maybe_dropout(inputs, config, opts);
  for (const auto& layer : params.decoder) {
    const Tensor<T> h = layer_norm(x, layer.self_norm);
    x = add(x, maybe_dropout(multi_head(h, h, layer.self_attn, config.n_heads, true), config, opts));
    const Tensor<T> c = layer_norm(x, layer.cross_norm);
    x = add(x, maybe_dropout(multi_head(c, latents, layer.cross_attn, config.n_heads, false), config, opts));
    const Tensor<T> f = layer_norm(x, layer.ff_norm);
    x = add(x, maybe_dropout(feed_forward(f, layer.ff_in, layer.ff_out), config, opts));
  }
  return add_row(matmul(layer_norm(x, params.decoder_norm), params.out_weight), params.out_bias);
}

template <typename T>
Tensor<T> decode(const Tensor<T>& latents, std::span<const TokenId> decoder_inputs, const ModelParams<T>& params,
                 const ModelConfig& config, RunOptions opts) {
  return decode_embedded(latents, embed_decoder_inputs(decoder_inputs, params, config), params, config, opts);
}

template <typename T>
TokenIds greedy_generate(const Tensor<T>& latents, const ModelParams<T>& params, const ModelConfig& config,
                         std::size_t max_len) {
  NoGradGuard no_grad;
  TokenIds inputs{kStartId};
  TokenIds out;
  const std::size_t limit = std::min(max_len, config.max_len - 1);
  while (out.size() < limit) {
    const Tensor<T> logits = decode(latents, std::span<const TokenId>(inputs), params, config);
    const std::size_t v = logits.dim(1);
    const auto row = logits.data().subspan((logits.dim(0) - 1) * v, v);
    TokenId best = 0;
    for (std::size_t j = 1; j < v; ++j)
      if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<TokenId>(j);
    if (best == kEndId) break;
    out.push_back(best);
    inputs.push_back(best);
  }
  return out;
}

#define VQL_INSTANTIATE_MODEL(T)                                                                                   \
  template struct ModelParams<T>;                                                                                  \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::mt19937_64&);                                    \
  template ModelParams<T> params_from_named<T>(const ModelConfig&,                                                 \
                                               const std::vector<std::pair<std::string, Tensor<T>>>&);             \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                                             \
  template Tensor<T> encode<T>(std::span<const TokenId>, const ModelParams<T>&, const ModelConfig&, RunOptions);   \
  template Tensor<T> embed_decoder_inputs<T>(std::span<const TokenId>, const ModelParams<T>&, const ModelConfig&); \
  template Tensor<T> decode_embedded<T>(const Tensor<T>&, const Tensor<T>&, const ModelParams<T>&,                 \
                                        const ModelConfig&, RunOptions);                                           \
  template Tensor<T> decode<T>(const Tensor<T>&, std::span<const TokenId>, const ModelParams<T>&,                  \
                               const ModelConfig&, RunOptions);                                                    \
  template TokenIds greedy_generate<T>(const Tensor<T>&, const ModelParams<T>&, const ModelConfig&, std::size_t);

VQL_INSTANTIATE_MODEL(float)
VQL_INSTANTIATE_MODEL(double)

#undef VQL_INSTANTIATE_MODEL

template ModelParams<double> convert_params<double, float>(const ModelParams<float>&);
template ModelParams<float> convert_params<float, double>(const ModelParams<double>&);
template ModelParams<float> convert_params<float, float>(const ModelParams<float>&);
template ModelParams<double> convert_params<double, double>(const ModelParams<double>&);

}  // namespace vql
