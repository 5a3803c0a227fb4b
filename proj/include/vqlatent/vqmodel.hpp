#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vqlatent/checkpoint.hpp"
#include "vqlatent/codebook.hpp"
#include "vqlatent/corpus.hpp"
#include "vqlatent/model.hpp"

namespace vql {

/// Encoder, decoder, codebook and vocabulary travelling together.
struct VqModel {
  ModelConfig config;
  QuantizerConfig quant;
  Vocabulary vocab;
  ModelParams<float> params;
  Codebook codebook;
  Tensor<float> gumbel_head;  // [d_model x K] selection logits, gumbel scheme only
};

/// Fresh model for `vocab`; `config.vocab_size` is overwritten with the
/// vocabulary size. Codebook entries start at zero until training seeds them.
VqModel init_model(const Vocabulary& vocab, ModelConfig config, const QuantizerConfig& quant, std::uint64_t seed);

Checkpoint to_checkpoint(const VqModel& model);
VqModel from_checkpoint(const Checkpoint& ckpt);
void save_model(const std::filesystem::path& path, const VqModel& model);
VqModel load_model(const std::filesystem::path& path);

/// Latent view of one sentence. Row i of every tensor is source token i, and
/// the last row belongs to the end token.
struct SentenceLatents {
  TokenIds source;
  Tensor<float> encoded;             // pre-quantization encoder output
  std::vector<std::size_t> indices;  // codebook assignment per row
  Tensor<float> quantized;           // codebook rows
};

SentenceLatents encode_sentence(const VqModel& model, const std::vector<std::string>& words);

/// Codebook indices for arbitrary rows under the model's scheme (nearest
/// entry for kmeans, noise-free argmax of the selection head for gumbel).
std::vector<std::size_t> assign_codes(const VqModel& model, const Tensor<float>& rows);

/// Greedy decoding of a latent sequence into words.
std::vector<std::string> decode_latents(const VqModel& model, const Tensor<float>& latents);
std::vector<std::string> decode_indices(const VqModel& model, const std::vector<std::size_t>& indices);

/// Encode, quantize and decode.
std::vector<std::string> reconstruct(const VqModel& model, const std::vector<std::string>& words);

}  // namespace vql
