#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"
#include "vqlatent/errors.hpp"
#include "vqlatent/model.hpp"
#include "vqlatent/ops.hpp"

using namespace vql;
using vql::ad::Tensor;

namespace {

struct Small {
  ModelConfig config;
  ModelParams<double> params;
};

Small small_model(std::uint64_t seed) {
  ModelConfig c;
  c.vocab_size = 12;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers_enc = 2;
  c.n_layers_dec = 2;
  c.d_ff = 16;
  c.max_len = 10;
  std::mt19937_64 rng(seed);
  return {c, init_params<double>(c, rng)};
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

std::vector<std::vector<double>> snapshot(const ModelParams<double>& p) {
  std::vector<std::vector<double>> out;
  for (const auto& t : p.list()) out.push_back(values(t));
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_heads = 5;
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("encode shapes, determinism and errors") {
  const Small m = small_model(1);
  const std::vector<TokenId> one{5};
  CHECK(encode<double>(one, m.params, m.config).shape() == ad::Shape{1, 8});

  const std::vector<TokenId> five{4, 5, 6, 7, 2};
  const auto a = encode<double>(five, m.params, m.config);
  const auto b = encode<double>(five, m.params, m.config);
  CHECK(values(a) == values(b));
  for (double v : a.data()) CHECK(std::isfinite(v));

  CHECK_THROWS_AS(encode<double>(std::vector<TokenId>{}, m.params, m.config), InputError);
  CHECK_THROWS_AS(encode<double>(std::vector<TokenId>{4, 99}, m.params, m.config), InputError);
  CHECK_THROWS_AS(encode<double>(std::vector<TokenId>(11, 4), m.params, m.config), InputError);
}

TEST_CASE("zero latents and zero decoder inputs give the output bias") {
  const Small m = small_model(2);
  const Tensor<double> latents = Tensor<double>::zeros({3, 8});
  const Tensor<double> inputs = Tensor<double>::zeros({4, 8});
  const auto logits = decode_embedded(latents, inputs, m.params, m.config);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t v = 0; v < 12; ++v) CHECK(logits.at(p, v) == doctest::Approx(m.params.out_bias.data()[v]).epsilon(1e-12));
}

TEST_CASE("cross-attention is live") {
  const Small m = small_model(3);
  std::mt19937_64 rng(4);
  const auto latents = vqtest::random_tensor({4, 8}, rng, -1, 1, false);
  const std::vector<TokenId> inputs{kStartId, 5, 6};
  const auto base = decode<double>(latents, inputs, m.params, m.config);
  for (std::size_t j = 0; j < 4; ++j) {
    auto bumped = Tensor<double>(latents.shape(), values(latents));
    for (std::size_t d = 0; d < 8; ++d) bumped.data_mut()[j * 8 + d] += 0.5;
    const auto out = decode<double>(bumped, inputs, m.params, m.config);
    double max_diff = 0;
    for (std::size_t i = 0; i < out.numel(); ++i) max_diff = std::max(max_diff, std::abs(out.data()[i] - base.data()[i]));
    CHECK(max_diff > 0.0);
  }

  // And the loss gradient reaches the latents.
  Tensor<double> z(latents.shape(), values(latents), true);
  const std::vector<TokenId> targets{5, 6, kEndId};
  ad::cross_entropy(decode<double>(z, inputs, m.params, m.config), std::span<const TokenId>(targets)).backward();
  double norm = 0;
  for (double g : z.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("decode rejects latents of the wrong width") {
  const Small m = small_model(5);
  const std::vector<TokenId> inputs{kStartId};
  CHECK_THROWS_AS(decode<double>(Tensor<double>::zeros({2, 7}), inputs, m.params, m.config), ShapeError);
}

TEST_CASE("decoder is causal") {
  const Small m = small_model(6);
  std::mt19937_64 rng(7);
  const auto latents = vqtest::random_tensor({3, 8}, rng, -1, 1, false);
  const std::vector<TokenId> a{kStartId, 4, 5, 6, 7};
  std::vector<TokenId> b = a;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = vqtest::rand_dim(rng, 0, a.size() - 2);
    b = a;
    for (std::size_t q = p + 1; q < b.size(); ++q) b[q] = static_cast<TokenId>(vqtest::rand_dim(rng, 4, 11));
    const auto la = decode<double>(latents, a, m.params, m.config);
    const auto lb = decode<double>(latents, b, m.params, m.config);
    for (std::size_t r = 0; r <= p; ++r)
      for (std::size_t v = 0; v < 12; ++v) CHECK(la.at(r, v) == lb.at(r, v));
  }
}

TEST_CASE("greedy generation bounds and determinism") {
  const Small m = small_model(8);
  std::mt19937_64 rng(9);
  const auto latents = vqtest::random_tensor({3, 8}, rng, -1, 1, false);
  CHECK(greedy_generate(latents, m.params, m.config, 1).size() <= 1);
  CHECK(greedy_generate(latents, m.params, m.config, 5) == greedy_generate(latents, m.params, m.config, 5));
  CHECK(greedy_generate(latents, m.params, m.config, 50).size() <= m.config.max_len - 1);
}

TEST_CASE("evaluation does not mutate parameters") {
  const Small m = small_model(10);
  const auto before = snapshot(m.params);
  const std::vector<TokenId> ids{4, 5, 2};
  const auto e = encode<double>(ids, m.params, m.config);
  decode<double>(e, std::vector<TokenId>{kStartId, 4}, m.params, m.config);
  greedy_generate(e, m.params, m.config, 4);
  CHECK(snapshot(m.params) == before);
}

TEST_CASE("positional encoding") {
  const auto pe = positional_encoding<double>(4, 6);
  CHECK(pe.at(0, 0) == 0.0);
  CHECK(pe.at(0, 1) == 1.0);
  CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)));
}

TEST_CASE("memorization: every training sentence is reproduced from its latents") {
  const VqModel& model = vqtest::memorized_model();
  for (const auto& s : memorization_corpus()) {
    INFO(s.text());
    const auto latents = encode_sentence(model, s.tokens);
    CHECK(decode_latents(model, latents.quantized) == s.tokens);
  }
  const auto report = evaluate_reconstruction(model, words_of(memorization_corpus()));
  CHECK(report.exact_match == 1.0);
  CHECK(report.token_accuracy == 1.0);
}

TEST_CASE("training with zero epochs leaves the initialization untouched") {
  const auto corpus = words_of(memorization_corpus());
  VqModel a = init_model(grammar_vocabulary(), ModelConfig{}, QuantizerConfig{}, 4);
  const VqModel b = init_model(grammar_vocabulary(), ModelConfig{}, QuantizerConfig{}, 4);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(train(a, corpus, cfg).empty());
  CHECK(serialize_checkpoint(to_checkpoint(a)) == serialize_checkpoint(to_checkpoint(b)));
}

TEST_CASE("loss log format") {
  const std::vector<EpochStats> stats{{1, 2.5, 0.125, 0.5}};
  CHECK(format_loss_log(stats) == "epoch,ce,commit,token_acc\n1,2.500000,0.125000,0.500000\n");
  CHECK(format_loss_log({}) == "epoch,ce,commit,token_acc\n");
}

TEST_CASE("gumbel scheme trains and decodes") {
  QuantizerConfig q;
  q.scheme = QuantScheme::gumbel;
  q.ema = false;
  VqModel m = init_model(grammar_vocabulary(), ModelConfig{}, q, 5);
  TrainConfig cfg = memorization_train_config();
  cfg.epochs = 2;
  const auto log = train(m, words_of(memorization_corpus()), cfg);
  CHECK(log.size() == 2);
  for (const auto& s : log) CHECK(std::isfinite(s.ce));
  const auto out = reconstruct(m, memorization_corpus()[0].tokens);
  CHECK(out.size() < m.config.max_len);
}
