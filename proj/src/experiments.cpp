#include "vqlatent/experiments.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "vqlatent/errors.hpp"

namespace vql {

Vocabulary grammar_vocabulary() {
  return Vocabulary::from_words(grammar_words());
}

std::vector<AnnotatedSentence> fixture_corpus(std::uint64_t seed, std::size_t count) {
  if (count < 2) throw ContractError("fixture_corpus: need room for the pinned sentences");
  std::vector<AnnotatedSentence> corpus = generate_sentences(seed, count);
  const AnnotatedSentence pinned[] = {make_is_a("shark", "fish"), make_is_a("fish", "aquatic animal")};
  std::size_t slot = corpus.size();
  for (const auto& p : pinned) {
    if (std::find(corpus.begin(), corpus.end(), p) != corpus.end()) continue;
    corpus[--slot] = p;
  }
  return corpus;
}

std::vector<std::vector<std::string>> words_of(const std::vector<AnnotatedSentence>& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(s.tokens);
  return out;
}

TrainConfig fixture_train_config() {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 16;
  c.adam.lr = 2e-3;
  c.seed = 11;
  return c;
}

std::vector<AnnotatedSentence> memorization_corpus() { return fixture_corpus(21, 10); }

TrainConfig memorization_train_config() {
  TrainConfig c = fixture_train_config();
  c.epochs = 60;
  return c;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed,
                                                              bool same) {
  if (n == 0 || (!same && n < 2)) throw ContractError("sample_pairs: not enough sentences");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  while (out.size() < count) {
    const std::size_t a = pick(rng);
    if (same) {
      out.emplace_back(a, a);
      continue;
    }
    const std::size_t b = pick(rng);
    if (a != b) out.emplace_back(a, b);
  }
  return out;
}

SmoothnessReport run_interpolation(const VqModel& model, const std::vector<std::vector<std::string>>& sentences,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs, double step_size) {
  SmoothnessReport r;
  std::map<std::size_t, Tensor<float>> latents;
  auto get = [&](std::size_t i) -> const Tensor<float>& {
    auto it = latents.find(i);
    if (it == latents.end()) it = latents.emplace(i, encode_sentence(model, sentences.at(i)).quantized).first;
    return it->second;
  };
  for (const auto& [a, b] : pairs) {
    InterpolationPath path = interpolate(model, get(a), get(b), step_size, true);
    r.values.push_back(interpolation_smoothness(model, path));
    r.paths.push_back(std::move(path));
    r.pairs.emplace_back(a, b);
  }
  if (!r.values.empty()) {
    double sum = 0.0;
    for (double v : r.values) sum += v;
    r.mean = sum / static_cast<double>(r.values.size());
    r.max = *std::max_element(r.values.begin(), r.values.end());
    r.min = *std::min_element(r.values.begin(), r.values.end());
  }
  return r;
}

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::topic: return "topic";
    case RegionKind::predicate: return "predicate";
    case RegionKind::argument: return "argument";
  }
  return "";
}

RegionSpec region_spec_from_string(const std::string& name) {
  if (name == "topic") return {RegionKind::topic, "if-then", "is-a"};
  if (name == "predicate") return {RegionKind::predicate, "causes", "means"};
  if (name == "argument") return {RegionKind::argument, "water", "something"};
  throw InputError("unknown region spec '" + name + "' (expected topic, predicate or argument)");
}

std::optional<std::string> region_feature(const RegionSpec& spec, const std::vector<std::string>& words) {
  switch (spec.kind) {
    case RegionKind::predicate: return extract_predicate(words);
    case RegionKind::topic: {
      const auto parsed = parse_sentence(words);
      if (!parsed) return std::nullopt;
      return parsed->topic;
    }
    case RegionKind::argument: {
      const auto parsed = parse_sentence(words);
      if (!parsed) return std::nullopt;
      const auto spans = parsed->spans(Role::ARG0);
      if (spans.empty()) return std::nullopt;
      std::string out;
      for (std::size_t i = spans[0].first; i < spans[0].second; ++i) out += (out.empty() ? "" : " ") + parsed->tokens[i];
      return out;
    }
  }
  return std::nullopt;
}

std::optional<int> region_label(const RegionSpec& spec, const std::vector<std::string>& words) {
  const auto f = region_feature(spec, words);
  if (!f) return std::nullopt;
  if (*f == spec.source) return 0;
  if (*f == spec.target) return 1;
  return std::nullopt;
}

TreeExperiment run_tree_experiment(const VqModel& model, const std::vector<AnnotatedSentence>& corpus,
                                   const RegionSpec& spec, std::size_t n_moves, std::uint64_t seed,
                                   std::size_t max_depth, std::size_t min_leaf) {
  std::vector<std::size_t> labelled;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (region_label(spec, corpus[i].tokens)) labelled.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(labelled.begin(), labelled.end(), rng);
  const std::size_t n_train = labelled.size() - labelled.size() / 5;

  FeatureRows train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t k = 0; k < labelled.size(); ++k) {
    const auto& words = corpus[labelled[k]].tokens;
    (k < n_train ? train_x : test_x).push_back(pooled_latent(model, words));
    (k < n_train ? train_y : test_y).push_back(*region_label(spec, words));
  }

  TreeExperiment ex;
  ex.tree = fit_tree(train_x, train_y, max_depth, min_leaf);
  ex.train_metrics = tree_metrics(ex.tree, train_x, train_y);
  ex.heldout_metrics = tree_metrics(ex.tree, test_x, test_y);
  ex.path = extract_path(ex.tree, 1);
  const std::vector<double> margins = edit_margins(train_x);

  std::set<std::vector<std::string>> seen;
  auto consider = [&](const AnnotatedSentence& s) {
    if (ex.moved.size() < n_moves && region_label(spec, s.tokens) == 0 && seen.insert(s.tokens).second) {
      ex.moved.push_back(s.tokens);
    }
  };
  for (const auto& s : corpus) consider(s);
  for (std::uint64_t round = 1; ex.moved.size() < n_moves && round <= 64; ++round)
    for (const auto& s : generate_sentences(seed + round, 500)) consider(s);

  std::vector<std::vector<std::string>> finals;
  for (const auto& words : ex.moved) {
    ex.moves.push_back(guided_move(model, words, ex.path, margins));
    finals.push_back(ex.moves.back().decoded.back());
  }
  ex.consistency = cross_region_consistency(
      finals, [&spec](const std::vector<std::string>& w) { return region_feature(spec, w); }, spec.target);
  return ex;
}

std::vector<SubstitutionInstance> substitution_instances(const std::vector<AnnotatedSentence>& corpus,
                                                         std::size_t count, std::uint64_t seed) {
  std::set<std::vector<std::string>> seen;
  std::vector<AnnotatedSentence> unique;
  for (const auto& s : corpus)
    if (seen.insert(s.tokens).second) unique.push_back(s);

  std::vector<SubstitutionInstance> arg, verb;
  for (const auto& p1 : unique) {
    for (const auto& p2 : unique) {
      if (p1.tokens == p2.tokens) continue;
      if (p1.template_id == "is-a" && p2.template_id == "is-a") {
        if (auto c = grammar_conclusion(p1, p2, SubstitutionOp::arg_sub)) arg.push_back({p1, p2, SubstitutionOp::arg_sub, *c});
      } else if (p1.template_id == "means-verb" && p2.template_id == "requires") {
        if (auto c = grammar_conclusion(p1, p2, SubstitutionOp::verb_sub)) verb.push_back({p1, p2, SubstitutionOp::verb_sub, *c});
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(arg.begin(), arg.end(), rng);
  std::shuffle(verb.begin(), verb.end(), rng);
  std::vector<SubstitutionInstance> out;
  std::size_t ia = 0, iv = 0;
  while (out.size() < count && (ia < arg.size() || iv < verb.size())) {
    const bool take_arg = iv >= verb.size() || (ia < arg.size() && out.size() % 2 == 0);
    out.push_back(take_arg ? arg[ia++] : verb[iv++]);
  }
  return out;
}

InferenceReport run_inference(const VqModel& model, const std::vector<SubstitutionInstance>& instances) {
  InferenceReport r;
  const std::size_t and_entry = connective_entry(model);
  std::size_t hits = 0;
  for (const auto& inst : instances) {
    const auto res = substitute_and_decode(model, annotate(model, inst.p1), annotate(model, inst.p2), inst.op, and_entry);
    const bool ok = res.decoded == inst.expected;
    hits += ok;
    r.outputs.push_back(res.decoded);
    r.exact.push_back(ok);
  }
  if (!instances.empty()) r.exact_match = static_cast<double>(hits) / static_cast<double>(instances.size());
  return r;
}

}  // namespace vql
