#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "geometry_checks.hpp"
#include "support.hpp"
#include "vqlatent/errors.hpp"
#include "vqlatent/geometry.hpp"

using namespace vql;

namespace {

Codebook grid_codebook() {
  return Codebook::from_entries(Tensor<float>({4, 2}, {0, 0, 1, 0, 0, 1, 1, 1}));
}

Codebook random_codebook(std::size_t K, std::size_t I, std::mt19937_64& rng) {
  std::vector<float> z(K * I);
  std::uniform_real_distribution<float> u(-1, 1);
  for (auto& v : z) v = u(rng);
  return Codebook::from_entries(Tensor<float>({K, I}, z));
}

std::vector<std::size_t> random_indices(std::size_t n, std::size_t K, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = vqtest::rand_dim(rng, 0, K - 1);
  return idx;
}

// Positions [first, last) of `b` outside the common prefix and suffix with `a`.
std::pair<std::size_t, std::size_t> changed_window(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t p = 0;
  while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
  std::size_t s = 0;
  while (s < a.size() - p && s < b.size() - p && a[a.size() - 1 - s] == b[b.size() - 1 - s]) ++s;
  return {p, std::max(a.size(), b.size()) - s};
}

AnnotatedLatents fake_latents(const AnnotatedSentence& s, std::size_t first) {
  std::vector<std::size_t> idx(s.tokens.size() + 1);
  std::iota(idx.begin(), idx.end(), first);
  return {s, idx};
}

}  // namespace

TEST_CASE("wmd examples") {
  std::mt19937_64 rng(1);
  const auto a = vqtest::random_bag(4, 3, rng);
  CHECK(std::abs(wmd(a, a).cost) < 1e-12);
  auto p = a;
  std::swap(p[0], p[3]);
  std::swap(p[1], p[2]);
  CHECK(std::abs(wmd(a, p).cost) < 1e-12);
  CHECK(wmd({{0.0}}, {{3.0}}).cost == doctest::Approx(3.0));
  CHECK_THROWS_AS(wmd({}, a), ContractError);
}

TEST_CASE("wmd matches the permutation oracle") {
  const auto r = vqtest::run_wmd_oracle(300, 2);
  CHECK(r.max_abs_error < 1e-9);
}

TEST_CASE("wmd plan marginals are uniform") {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = vqtest::rand_dim(rng, 1, 6), m = vqtest::rand_dim(rng, 1, 6);
    const auto res = wmd(vqtest::random_bag(n, 2, rng), vqtest::random_bag(m, 2, rng));
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < m; ++j) row += res.plan[i * m + j];
      CHECK(row == doctest::Approx(1.0 / static_cast<double>(n)));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double col = 0;
      for (std::size_t i = 0; i < n; ++i) col += res.plan[i * m + j];
      CHECK(col == doctest::Approx(1.0 / static_cast<double>(m)));
    }
    CHECK(res.cost >= 0.0);
  }
}

TEST_CASE("wmd is a pseudometric") {
  std::mt19937_64 rng(4);
  for (int c = 0; c < 200; ++c) {
    const std::size_t dim = vqtest::rand_dim(rng, 1, 4);
    const auto a = vqtest::random_bag(vqtest::rand_dim(rng, 1, 5), dim, rng);
    const auto b = vqtest::random_bag(vqtest::rand_dim(rng, 1, 5), dim, rng);
    const auto e = vqtest::random_bag(vqtest::rand_dim(rng, 1, 5), dim, rng);
    const double ab = wmd(a, b).cost, ba = wmd(b, a).cost, ae = wmd(a, e).cost, eb = wmd(e, b).cost;
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) < 1e-7);
    CHECK(ab <= ae + eb + 1e-7);
  }
}

TEST_CASE("interpolation on a 4-entry codebook equals the exhaustive argmin") {
  const Codebook cb = grid_codebook();
  for (std::size_t s0 = 0; s0 < 4; ++s0)
    for (std::size_t s1 = 0; s1 < 4; ++s1)
      for (std::size_t t0 = 0; t0 < 4; ++t0)
        for (std::size_t t1 = 0; t1 < 4; ++t1) {
          const std::vector<std::size_t> src{s0, s1}, tgt{t0, t1};
          const auto path = interpolate_codes(cb, cb.rows(src), cb.rows(tgt));
          const auto oracle = vqtest::brute_force_path(cb, src, tgt);
          REQUIRE(path.steps.size() == 11);
          for (std::size_t k = 0; k < 11; ++k) CHECK(path.steps[k].indices == oracle[k]);
        }
}

TEST_CASE("interpolation path properties") {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 100; ++c) {
    const std::size_t K = vqtest::rand_dim(rng, 2, 20), I = vqtest::rand_dim(rng, 1, 5);
    const Codebook cb = random_codebook(K, I, rng);
    const std::size_t L = vqtest::rand_dim(rng, 1, 6);
    const auto src = random_indices(L, K, rng), tgt = random_indices(L, K, rng);
    const auto path = interpolate_codes(cb, cb.rows(src), cb.rows(tgt));
    CHECK(path.steps.front().indices == src);
    CHECK(path.steps.back().indices == tgt);
    CHECK(path.steps.back().t == 1.0);
    for (std::size_t k = 1; k < path.steps.size(); ++k) CHECK(path.steps[k].t > path.steps[k - 1].t);
    for (const auto& step : path.steps)
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t d = 0; d < I; ++d) CHECK(step.latents.at(i, d) == cb.entry(step.indices[i])[d]);

    const auto same = interpolate_codes(cb, cb.rows(src), cb.rows(src));
    for (const auto& step : same.steps) CHECK(step.indices == src);
  }
}

TEST_CASE("interpolation length handling") {
  const Codebook cb = grid_codebook();
  const std::vector<std::size_t> a{0, 1, 2}, b{3, 2};
  CHECK_THROWS_AS(interpolate_codes(cb, cb.rows(a), cb.rows(b), 0.1, false), ContractError);
  const auto path = interpolate_codes(cb, cb.rows(a), cb.rows(b));
  CHECK(path.steps.back().indices == std::vector<std::size_t>{3, 2, 2});
  CHECK_THROWS_AS(interpolate_codes(cb, cb.rows(a), cb.rows(b), 0.0), ContractError);
}

TEST_CASE("interpolation smoothness") {
  const std::vector<std::vector<std::string>> two{{"a"}, {"b"}};
  const std::vector<EmbeddingBag> bags{{{0.0}}, {{2.0}}};
  CHECK(interpolation_smoothness(two, bags) == 1.0);
  CHECK(interpolation_smoothness({{"a"}, {"a"}, {"a"}}, {{{0.0}}, {{0.0}}, {{0.0}}}) == 1.0);
  // A detour through 5 on the way from 0 to 2: 2 / (5 + 3).
  CHECK(interpolation_smoothness({{"a"}, {"c"}, {"b"}}, {{{0.0}}, {{5.0}}, {{2.0}}}) == doctest::Approx(0.25));
  // Repeated sentences are collapsed.
  CHECK(interpolation_smoothness({{"a"}, {"a"}, {"b"}, {"b"}}, {{{0.0}}, {{0.0}}, {{2.0}}, {{2.0}}}) == 1.0);
  CHECK_THROWS_AS(interpolation_smoothness(two, {{{0.0}}}), ContractError);

  std::mt19937_64 rng(6);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = vqtest::rand_dim(rng, 2, 8);
    std::vector<std::vector<std::string>> decoded;
    std::vector<EmbeddingBag> path_bags;
    for (std::size_t s = 0; s < n; ++s) {
      decoded.push_back({std::to_string(s)});
      path_bags.push_back(vqtest::random_bag(vqtest::rand_dim(rng, 1, 4), 3, rng));
    }
    const double is = interpolation_smoothness(decoded, path_bags);
    CHECK(is > 0.0);
    CHECK(is <= 1.0 + 1e-9);
  }
}

TEST_CASE("interpolation on the memorized model") {
  const VqModel& model = vqtest::memorized_model();
  const auto corpus = memorization_corpus();
  const auto a = encode_sentence(model, corpus[0].tokens), b = encode_sentence(model, corpus[1].tokens);
  const auto path = interpolate(model, a.quantized, b.quantized);
  CHECK(path.steps.front().decoded == corpus[0].tokens);
  CHECK(path.steps.back().decoded == corpus[1].tokens);
  const double is = interpolation_smoothness(model, path);
  CHECK(is > 0.0);
  CHECK(is <= 1.0 + 1e-9);
  CHECK(interpolation_smoothness(model, interpolate(model, a.quantized, a.quantized)) == 1.0);
  CHECK(format_path(path).starts_with("0.0\t"));
}

TEST_CASE("traversal") {
  const VqModel& model = vqtest::memorized_model();
  const auto words = split_words("a shark is a kind of fish");
  const auto latents = encode_sentence(model, words);

  const auto one = traverse_position(model, latents.indices, 0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].decoded == words);

  const auto variants = traverse_position(model, latents.indices, 0, 10);
  REQUIRE(variants.size() == 10);
  std::size_t local = 0;
  for (const auto& v : variants) {
    std::size_t changed_rows = 0;
    for (std::size_t i = 0; i < v.indices.size(); ++i) changed_rows += v.indices[i] != latents.indices[i];
    CHECK(changed_rows <= 1);
    CHECK(v.indices[0] == v.entry);
    const auto [first, last] = changed_window(words, v.decoded);
    local += first >= last || last <= 2;  // changes confined to positions 0..1
  }
  CHECK(local * 10 >= 7 * variants.size());

  CHECK_THROWS_AS(traverse_position(model, latents.indices, latents.indices.size(), 2), ContractError);
}

TEST_CASE("nearest entries are ordered by distance") {
  const Codebook cb = Codebook::from_entries(Tensor<float>({4, 1}, {0, 3, 1, -1}));
  CHECK(nearest_entries(cb, 0, 4) == std::vector<std::size_t>{0, 2, 3, 1});
  CHECK_THROWS_AS(nearest_entries(cb, 0, 5), ContractError);
}

TEST_CASE("latent arithmetic") {
  const Codebook cb = grid_codebook();
  CHECK(add_and_quantize(cb, cb.rows(std::vector<std::size_t>{1}), cb.rows(std::vector<std::size_t>{2})) ==
        std::vector<std::size_t>{3});

  std::mt19937_64 rng(7);
  for (int c = 0; c < 50; ++c) {
    const Codebook r = random_codebook(vqtest::rand_dim(rng, 2, 12), 3, rng);
    const auto a = r.rows(random_indices(vqtest::rand_dim(rng, 1, 5), r.size(), rng));
    const auto b = r.rows(random_indices(vqtest::rand_dim(rng, 1, 5), r.size(), rng));
    CHECK(add_and_quantize(r, a, b) == add_and_quantize(r, b, a));
    const auto zero = Tensor<float>::zeros(a.shape());
    const auto idx = add_and_quantize(r, a, zero);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t d = 0; d < 3; ++d) CHECK(r.entry(idx[i])[d] == a.at(i, d));
  }

  const VqModel& model = vqtest::memorized_model();
  const auto s = encode_sentence(model, memorization_corpus()[2].tokens);
  CHECK(latent_arithmetic_add(model, s.quantized, Tensor<float>::zeros(s.quantized.shape())) ==
        memorization_corpus()[2].tokens);
}

TEST_CASE("disentanglement statistics") {
  const Codebook cb = Codebook::from_entries(Tensor<float>({3, 1}, {0, 2, 5}));
  const AnnotatedSentence s = make_causes("heat", "melting");
  const std::vector<AnnotatedLatents> corpus{{s, {0, 1, 2}}, {s, {1, 1, 2, 0}}};
  const auto stats = disentanglement_stats(corpus, cb);
  REQUIRE(stats.size() == 3);
  CHECK(stats[0].label == "ARG0-heat");
  CHECK(stats[0].num_centers == 2);
  CHECK(stats[0].avg_dis == 2.0);
  CHECK(stats[0].min_dis == 2.0);
  CHECK(stats[0].max_dis == 2.0);
  CHECK(stats[2].label == "PRED-causes");
  CHECK(stats[2].num_centers == 1);
  CHECK(stats[2].avg_dis == 0.0);
  CHECK_THROWS_AS(disentanglement_stats({{s, {0}}}, cb), ContractError);
}

TEST_CASE("disentanglement on the trained model") {
  const VqModel& model = vqtest::memorized_model();
  std::vector<AnnotatedLatents> corpus;
  for (const auto& s : generate_sentences(12, 200)) corpus.push_back(annotate(model, s));
  const auto stats = disentanglement_stats(corpus, model.codebook);
  std::size_t max_occ = 0;
  for (const auto& st : stats) {
    CHECK(st.num_centers >= 1);
    CHECK(st.num_centers <= st.occurrences);
    CHECK(st.min_dis <= st.avg_dis + 1e-12);
    CHECK(st.avg_dis <= st.max_dis + 1e-12);
    max_occ = std::max(max_occ, st.occurrences);
  }
  // Monotonicity: the most frequent contents have at least as many centers
  // as contents seen once.
  std::size_t most = 0;
  for (const auto& st : stats)
    if (st.occurrences == max_occ) most = std::max(most, st.num_centers);
  for (const auto& st : stats)
    if (st.occurrences == 1) CHECK(st.num_centers <= most);
}

TEST_CASE("argument substitution edits the shared span") {
  const auto p1 = fake_latents(make_is_a("shark", "fish"), 10);
  const auto p2 = fake_latents(make_is_a("fish", "aquatic animal"), 20);
  CHECK(substitute(p1, p2, SubstitutionOp::arg_sub) == std::vector<std::size_t>{20, 11, 22, 23, 24, 25, 26, 27, 28});
  CHECK(substitute(p2, p2, SubstitutionOp::arg_sub) == p2.indices);
  CHECK(grammar_conclusion(p1.sentence, p2.sentence, SubstitutionOp::arg_sub) ==
        split_words("a shark is a kind of aquatic animal"));
  const auto other = fake_latents(make_causes("heat", "melting"), 40);
  CHECK_THROWS_AS(substitute(p1, other, SubstitutionOp::arg_sub), NoAnchorError);
}

TEST_CASE("verb substitution") {
  const auto p1 = fake_latents(make_means_verb("melt", "thaw"), 10);
  const auto p2 = fake_latents(make_requires("ice", "heat", "melt"), 20);
  // "ice requires heat to melt" -> "ice requires heat to thaw"
  CHECK(substitute(p1, p2, SubstitutionOp::verb_sub) == std::vector<std::size_t>{20, 21, 22, 23, 14, 25});
  CHECK(grammar_conclusion(p1.sentence, p2.sentence, SubstitutionOp::verb_sub) ==
        split_words("ice requires heat to thaw"));
}

TEST_CASE("substitution leaves rows outside the edited span alone") {
  for (const auto& inst : substitution_instances(generate_sentences(13, 400), 50, 1)) {
    const auto p1 = fake_latents(inst.p1, 100);
    const auto p2 = fake_latents(inst.p2, 200);
    const auto out = substitute(p1, p2, inst.op);
    CHECK(out.front() == 200);
    CHECK(out.back() == p2.indices.back());
    std::size_t from_p1 = 0;
    for (std::size_t i : out) from_p1 += i < 200;
    CHECK(from_p1 >= 1);
  }
}

TEST_CASE("further specification and conjunction") {
  const auto p1 = fake_latents(make_can_in("fish", "swim", "water"), 10);
  const auto p2 = fake_latents(make_can("fish", "swim"), 20);
  // p2 words, then "in water" from p1, then p2's end row.
  CHECK(substitute(p1, p2, SubstitutionOp::further_spec) == std::vector<std::size_t>{20, 21, 22, 23, 14, 15, 24});

  const auto c1 = fake_latents(make_can("bird", "fly"), 30);
  const auto c2 = fake_latents(make_can("bird", "swim"), 40);
  CHECK(substitute(c1, c2, SubstitutionOp::conjunction, 99) == std::vector<std::size_t>{30, 31, 32, 33, 99, 43, 34});
  CHECK_THROWS_AS(substitute(c1, fake_latents(make_causes("heat", "melting"), 50), SubstitutionOp::conjunction),
                  NoAnchorError);
}

TEST_CASE("substitution op names") {
  CHECK(substitution_op_from_string(to_string(SubstitutionOp::verb_sub)) == SubstitutionOp::verb_sub);
  CHECK_THROWS_AS(substitution_op_from_string("swap"), InputError);
}
