#include "vqlatent/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "vqlatent/bleu.hpp"
#include "vqlatent/errors.hpp"
#include "vqlatent/ops.hpp"

namespace vql {

using namespace ad;

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("train: batch_size must be positive");
  if (!(adam.lr > 0.0)) throw ContractError("train: learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ContractError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ContractError("train: Adam epsilon must be positive");
}

bool TrainConfig::operator==(const TrainConfig& o) const {
  return epochs == o.epochs && batch_size == o.batch_size && seed == o.seed && adam.lr == o.adam.lr &&
         adam.beta1 == o.adam.beta1 && adam.beta2 == o.adam.beta2 && adam.eps == o.adam.eps &&
         adam.clip_norm == o.adam.clip_norm;
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr", c.adam.lr},
                        {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},      {"eps", c.adam.eps},
                        {"clip_norm", c.adam.clip_norm}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.adam.lr = j.value("lr", c.adam.lr);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("eps", c.adam.eps);
  c.adam.clip_norm = j.value("clip_norm", c.adam.clip_norm);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

struct Example {
  TokenIds source;
  TokenIds decoder_inputs;
  TokenIds targets;
};

std::vector<TokenId> to_ids(const std::vector<std::size_t>& idx) {
  return std::vector<TokenId>(idx.begin(), idx.end());
}

std::size_t argmax_row(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

void warmup_codebook(VqModel& model, const std::vector<Example>& examples, std::mt19937_64& rng) {
  NoGradGuard guard;
  std::vector<float> rows;
  for (const auto& ex : examples) {
    const Tensor<float> e = encode<float>(ex.source, model.params, model.config);
    rows.insert(rows.end(), e.data().begin(), e.data().end());
  }
  seed_codebook(model.codebook, rows, rng);
}

}  // namespace

std::vector<EpochStats> train(VqModel& model, const std::vector<std::vector<std::string>>& sentences,
                              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.quant.validate();
  if (sentences.empty()) throw ContractError("train: empty corpus");
  std::vector<EpochStats> log;
  if (config.epochs == 0) return log;

  std::vector<Example> examples;
  for (const auto& words : sentences) {
    if (words.size() + 1 > model.config.max_len) {
      throw InputError("train: sentence of " + std::to_string(words.size()) + " words exceeds max_len");
    }
    Example ex;
    ex.source = source_ids(words, model.vocab);
    ex.decoder_inputs = {kStartId};
    for (const auto& w : words) ex.decoder_inputs.push_back(model.vocab.id(w));
    ex.targets.assign(ex.decoder_inputs.begin() + 1, ex.decoder_inputs.end());
    ex.targets.push_back(kEndId);
    examples.push_back(std::move(ex));
  }

  std::mt19937_64 rng(config.seed);
  warmup_codebook(model, examples, rng);

  const QuantizerConfig& q = model.quant;
  const bool gumbel = q.scheme == QuantScheme::gumbel;
  const bool ema = q.ema && !gumbel;
  const bool codebook_term = !ema || q.codebook_loss_with_ema;

  std::vector<Tensor<float>> trainable = model.params.list();
  Tensor<float> codebook_param;
  if (!ema) {
    codebook_param = Tensor<float>({model.codebook.size(), model.codebook.width()},
                                   std::vector<float>(model.codebook.entries().begin(), model.codebook.entries().end()),
                                   true);
    trainable.push_back(codebook_param);
  }
  if (gumbel) trainable.push_back(model.gumbel_head);
  Adam<float> adam(trainable, config.adam);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const RunOptions run{Mode::train, &rng};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double ce_sum = 0.0, commit_sum = 0.0;
    std::size_t correct = 0, predicted = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(stop - start);
      adam.zero_grad();
      std::vector<float> batch_rows;
      std::vector<std::size_t> batch_idx;
      for (std::size_t b = start; b < stop; ++b) {
        const Example& ex = examples[order[b]];
        const Tensor<float> e = encode<float>(ex.source, model.params, model.config, run);
        std::vector<std::size_t> idx;
        Tensor<float> zq, latents;
        if (gumbel) {
          const Tensor<float> logits = matmul(e, model.gumbel_head);
          const std::vector<double> g = sample_gumbel(logits.numel(), rng);
          const Tensor<float> noise(logits.shape(), std::vector<float>(g.begin(), g.end()));
          const Tensor<float> perturbed = add(logits, noise);
          const std::size_t K = logits.dim(1);
          for (std::size_t i = 0; i < logits.dim(0); ++i) idx.push_back(argmax_row(perturbed.data().subspan(i * K, K)));
          const Tensor<float> y = softmax(scale(perturbed, static_cast<float>(1.0 / q.tau)), 1);
          zq = embedding(codebook_param, to_ids(idx));
          latents = straight_through(matmul(y, codebook_param), zq);
        } else {
          idx = quantize_kmeans(e, model.codebook).indices;
          zq = ema ? model.codebook.rows(idx) : embedding(codebook_param, to_ids(idx));
          latents = straight_through(e, zq);
        }
        const Tensor<float> logits = decode(latents, std::span<const TokenId>(ex.decoder_inputs), model.params,
                                            model.config, run);
        const Tensor<float> ce = cross_entropy(logits, std::span<const TokenId>(ex.targets));
        const Tensor<float> loss = vq_loss(e, zq, ce, q.beta, codebook_term);
        scale(loss, inv_batch).backward();

        ce_sum += ce.item();
        double commit = 0.0;
        for (std::size_t j = 0; j < e.numel(); ++j) {
          const double d = static_cast<double>(e.data()[j]) - zq.data()[j];
          commit += d * d;
        }
        commit_sum += commit;
        const std::size_t V = logits.dim(1);
        for (std::size_t p = 0; p < ex.targets.size(); ++p) {
          correct += argmax_row(logits.data().subspan(p * V, V)) == static_cast<std::size_t>(ex.targets[p]);
          ++predicted;
        }
        if (ema) {
          batch_rows.insert(batch_rows.end(), e.data().begin(), e.data().end());
          batch_idx.insert(batch_idx.end(), idx.begin(), idx.end());
        }
      }
      adam.step();
      if (ema) {
        ema_update(model.codebook, batch_rows, batch_idx, &rng);
      } else {
        std::copy(codebook_param.data().begin(), codebook_param.data().end(), model.codebook.entries_mut().begin());
      }
    }
    const double n = static_cast<double>(examples.size());
    EpochStats s{epoch, ce_sum / n, commit_sum / n, static_cast<double>(correct) / static_cast<double>(predicted)};
    log.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return log;
}

std::string format_loss_log(const std::vector<EpochStats>& stats) {
  std::string out = "epoch,ce,commit,token_acc\n";
  char buf[128];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", s.epoch, s.ce, s.commit, s.token_acc);
    out += buf;
  }
  return out;
}

ReconstructionReport evaluate_reconstruction(const VqModel& model,
                                             const std::vector<std::vector<std::string>>& sentences) {
  ReconstructionReport report;
  std::size_t exact = 0, matched = 0, positions = 0;
  std::vector<std::vector<std::string>> outputs;
  for (const auto& ref : sentences) {
    SentenceReconstruction r;
    r.reference = ref;
    r.output = reconstruct(model, ref);
    r.exact = r.output == r.reference;
    // Position-wise comparison with the end token appended to both sides.
    const std::size_t a = ref.size() + 1, b = r.output.size() + 1;
    std::size_t m = 0;
    for (std::size_t i = 0; i < std::min(a, b); ++i) {
      const bool ref_end = i == ref.size(), out_end = i == r.output.size();
      if (ref_end || out_end) {
        m += ref_end && out_end;
      } else {
        m += ref[i] == r.output[i];
      }
    }
    r.token_accuracy = static_cast<double>(m) / static_cast<double>(std::max(a, b));
    exact += r.exact;
    matched += m;
    positions += std::max(a, b);
    outputs.push_back(r.output);
    report.sentences.push_back(std::move(r));
  }
  if (!sentences.empty()) {
    report.exact_match = static_cast<double>(exact) / static_cast<double>(sentences.size());
    report.token_accuracy = static_cast<double>(matched) / static_cast<double>(positions);
    for (int n = 1; n <= 4; ++n) report.bleu[static_cast<std::size_t>(n - 1)] = corpus_bleu(sentences, outputs, n);
  }
  return report;
}

}  // namespace vql
