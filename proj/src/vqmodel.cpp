#include "vqlatent/vqmodel.hpp"

#include <cmath>
#include <random>

#include "vqlatent/errors.hpp"
#include "vqlatent/ops.hpp"

namespace vql {

VqModel init_model(const Vocabulary& vocab, ModelConfig config, const QuantizerConfig& quant, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  quant.validate();
  std::mt19937_64 rng(seed);
  VqModel m{config, quant, vocab, init_params<float>(config, rng), Codebook(quant.codebook_size, config.d_model, quant.decay), {}};
  if (quant.scheme == QuantScheme::gumbel) {
    std::normal_distribution<float> nd(0.0f, 1.0f / std::sqrt(static_cast<float>(config.d_model)));
    std::vector<float> w(config.d_model * quant.codebook_size);
    for (float& v : w) v = nd(rng);
    m.gumbel_head = Tensor<float>({config.d_model, quant.codebook_size}, std::move(w), true);
  }
  return m;
}

Checkpoint to_checkpoint(const VqModel& model) {
  Checkpoint ckpt;
  ckpt.config = nlohmann::json{{"model", to_json(model.config)},
                               {"quantizer", to_json(model.quant)},
                               {"vocab", model.vocab.words()}};
  for (const auto& [name, t] : model.params.named()) ckpt.tensors.emplace_back(name, t.detach());
  ckpt.tensors.emplace_back("codebook.z", model.codebook.entries_tensor());
  ckpt.tensors.emplace_back("codebook.N", model.codebook.counts_tensor());
  ckpt.tensors.emplace_back("codebook.m", model.codebook.sums_tensor());
  if (model.gumbel_head.defined()) ckpt.tensors.emplace_back("gumbel.head", model.gumbel_head.detach());
  return ckpt;
}

VqModel from_checkpoint(const Checkpoint& ckpt) {
  try {
    const ModelConfig config = model_config_from_json(ckpt.config.at("model"));
    const QuantizerConfig quant = quantizer_config_from_json(ckpt.config.at("quantizer"));
    config.validate();
    quant.validate();
    Vocabulary vocab = Vocabulary::from_words(ckpt.config.at("vocab").get<std::vector<std::string>>());
    if (vocab.size() != config.vocab_size) throw InputError("checkpoint: vocabulary size disagrees with model config");
    std::vector<std::pair<std::string, Tensor<float>>> named;
    for (const auto& [name, t] : ckpt.tensors)
      if (!name.starts_with("codebook.") && !name.starts_with("gumbel.")) named.emplace_back(name, t);
    VqModel m{config,
              quant,
              std::move(vocab),
              params_from_named<float>(config, named),
              Codebook::from_state(ckpt.tensor("codebook.z"), ckpt.tensor("codebook.N"), ckpt.tensor("codebook.m"),
                                   quant.decay),
              {}};
    if (m.codebook.size() != quant.codebook_size || m.codebook.width() != config.d_model) {
      throw InputError("checkpoint: codebook shape disagrees with config");
    }
    if (quant.scheme == QuantScheme::gumbel) {
      const auto& h = ckpt.tensor("gumbel.head");
      m.gumbel_head = Tensor<float>(h.shape(), std::vector<float>(h.data().begin(), h.data().end()), true);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: bad config: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const VqModel& model) {
  write_checkpoint(path, to_checkpoint(model));
}

VqModel load_model(const std::filesystem::path& path) {
  return from_checkpoint(read_checkpoint(path));
}

std::vector<std::size_t> assign_codes(const VqModel& model, const Tensor<float>& rows) {
  if (model.quant.scheme == QuantScheme::kmeans) return quantize_kmeans(rows, model.codebook).indices;
  ad::NoGradGuard guard;
  const Tensor<float> logits = ad::matmul(rows, model.gumbel_head);
  const std::size_t L = logits.dim(0), K = logits.dim(1);
  std::vector<std::size_t> idx(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto r = logits.data().subspan(i * K, K);
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (r[k] > r[best]) best = k;
    idx[i] = best;
  }
  return idx;
}

SentenceLatents encode_sentence(const VqModel& model, const std::vector<std::string>& words) {
  ad::NoGradGuard guard;
  SentenceLatents s;
  s.source = source_ids(words, model.vocab);
  s.encoded = encode<float>(s.source, model.params, model.config);
  s.indices = assign_codes(model, s.encoded);
  s.quantized = model.codebook.rows(s.indices);
  return s;
}

std::vector<std::string> decode_latents(const VqModel& model, const Tensor<float>& latents) {
  const TokenIds ids = greedy_generate<float>(latents, model.params, model.config, model.config.max_len);
  return detokenize_words(ids, model.vocab);
}

std::vector<std::string> decode_indices(const VqModel& model, const std::vector<std::size_t>& indices) {
  return decode_latents(model, model.codebook.rows(indices));
}

std::vector<std::string> reconstruct(const VqModel& model, const std::vector<std::string>& words) {
  return decode_latents(model, encode_sentence(model, words).quantized);
}

}  // namespace vql
