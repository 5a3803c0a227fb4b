#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vqlatent/tensor.hpp"
#include "vqlatent/tokens.hpp"

namespace vql {

using ad::Tensor;

struct ModelConfig {
  std::size_t vocab_size = 300;
  std::size_t d_model = 64;  // also the codebook entry width
  std::size_t n_heads = 4;
  std::size_t n_layers_enc = 2;
  std::size_t n_layers_dec = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = 32;
  double dropout_rate = 0.0;

  /// Throws ContractError when the fields are inconsistent.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

template <typename T>
struct AttentionWeights {
  Tensor<T> wq, wk, wv, wo;
};

template <typename T>
struct EncoderLayer {
  Tensor<T> attn_norm;
  AttentionWeights<T> attn;
  Tensor<T> ff_norm, ff_in, ff_out;
};

template <typename T>
struct DecoderLayer {
  Tensor<T> self_norm;
  AttentionWeights<T> self_attn;
  Tensor<T> cross_norm;
  AttentionWeights<T> cross_attn;  // keys and values are projections of the quantized latents
  Tensor<T> ff_norm, ff_in, ff_out;
};

/// All trainable weights. Norms are scale-only and the attention and
/// feed-forward projections carry no bias; the output projection does.
template <typename T>
struct ModelParams {
  Tensor<T> token_embedding;  // [vocab x d_model], shared by encoder and decoder
  std::vector<EncoderLayer<T>> encoder;
  Tensor<T> encoder_norm;
  std::vector<DecoderLayer<T>> decoder;
  Tensor<T> decoder_norm;
  Tensor<T> out_weight;  // [d_model x vocab]
  Tensor<T> out_bias;    // [vocab]

  /// Shallow handles in a fixed order; names are stable checkpoint keys.
  std::vector<std::pair<std::string, Tensor<T>>> named() const;
  std::vector<Tensor<T>> list() const;
};

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::mt19937_64& rng);

/// Deep copy with a different scalar type. Every tensor requires grad.
template <typename To, typename From>
ModelParams<To> convert_params(const ModelParams<From>& params);

/// Builds a parameter set from named tensors (checkpoint order not required).
template <typename T>
ModelParams<T> params_from_named(const ModelConfig& config,
                                 const std::vector<std::pair<std::string, Tensor<T>>>& named);

enum class Mode { eval, train };

/// Dropout only runs in train mode and then needs `rng`.
struct RunOptions {
  Mode mode = Mode::eval;
  std::mt19937_64* rng = nullptr;
};

/// Sinusoidal position table [length x width].
template <typename T>
Tensor<T> positional_encoding(std::size_t length, std::size_t width);

/// One continuous vector per input token: [L x d_model].
template <typename T>
Tensor<T> encode(std::span<const TokenId> ids, const ModelParams<T>& params, const ModelConfig& config,
                 RunOptions opts = {});

/// Token embeddings plus positions for a decoder input sequence.
template <typename T>
Tensor<T> embed_decoder_inputs(std::span<const TokenId> ids, const ModelParams<T>& params, const ModelConfig& config);

/// Next-token logits [L' x vocab] for decoder inputs (starting with the start
/// token) under causal self-attention and cross-attention over `latents`.
template <typename T>
Tensor<T> decode(const Tensor<T>& latents, std::span<const TokenId> decoder_inputs, const ModelParams<T>& params,
                 const ModelConfig& config, RunOptions opts = {});

/// Same as `decode` but starting from already-embedded decoder inputs.
template <typename T>
Tensor<T> decode_embedded(const Tensor<T>& latents, const Tensor<T>& inputs, const ModelParams<T>& params,
                          const ModelConfig& config, RunOptions opts = {});

/// Greedy decoding from the start token until the end token or `max_len`
/// emitted tokens. The returned sequence excludes start and end tokens.
template <typename T>
TokenIds greedy_generate(const Tensor<T>& latents, const ModelParams<T>& params, const ModelConfig& config,
                         std::size_t max_len);

}  // namespace vql
