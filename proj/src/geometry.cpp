#include "vqlatent/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "vqlatent/errors.hpp"

namespace vql {

namespace {

std::vector<float> padded_rows(const Tensor<float>& x, std::size_t length) {
  const std::size_t L = x.dim(0), I = x.dim(1);
  std::vector<float> out(x.data().begin(), x.data().end());
  for (std::size_t r = L; r < length; ++r) out.insert(out.end(), x.data().begin() + (L - 1) * I, x.data().end());
  return out;
}

void check_latents(const Tensor<float>& x, const Codebook& cb, const char* what) {
  if (x.rank() != 2 || x.dim(1) != cb.width()) {
    throw ShapeError(std::string(what) + ": latents " + ad::shape_str(x.shape()) + " do not have width " +
                     std::to_string(cb.width()));
  }
}

}  // namespace

InterpolationPath interpolate_codes(const Codebook& cb, const Tensor<float>& source, const Tensor<float>& target,
                                    double step_size, bool pad) {
  check_latents(source, cb, "interpolate");
  check_latents(target, cb, "interpolate");
  if (!(step_size > 0.0 && step_size <= 1.0)) throw ContractError("interpolate: step size must lie in (0, 1]");
  const std::size_t Ls = source.dim(0), Lt = target.dim(0), I = cb.width();
  if (Ls != Lt && !pad) {
    throw ContractError("interpolate: source has " + std::to_string(Ls) + " tokens, target " + std::to_string(Lt));
  }
  const std::size_t L = std::max(Ls, Lt);
  const std::vector<float> tgt = padded_rows(target, L);
  std::vector<float> prev = padded_rows(source, L);

  const auto n_steps = static_cast<std::size_t>(std::ceil(1.0 / step_size - 1e-9));
  InterpolationPath path;
  path.step_size = step_size;
  for (std::size_t s = 0; s <= n_steps; ++s) {
    const double t = s == n_steps ? 1.0 : static_cast<double>(s) * step_size;
    InterpolationStep step;
    step.t = t;
    step.indices.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      const std::span<const float> zp(prev.data() + i * I, I), zt(tgt.data() + i * I, I);
      std::size_t best = 0;
      double best_v = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < cb.size(); ++j) {
        const double v = (1.0 - t) * std::sqrt(squared_distance<float>(zp, cb.entry(j))) +
                         t * std::sqrt(squared_distance<float>(zt, cb.entry(j)));
        if (v < best_v) {
          best_v = v;
          best = j;
        }
      }
      step.indices[i] = best;
    }
    step.latents = cb.rows(step.indices);
    prev.assign(step.latents.data().begin(), step.latents.data().end());
    path.steps.push_back(std::move(step));
  }
  return path;
}

InterpolationPath interpolate(const VqModel& model, const Tensor<float>& source, const Tensor<float>& target,
                              double step_size, bool pad) {
  InterpolationPath path = interpolate_codes(model.codebook, source, target, step_size, pad);
  for (auto& step : path.steps) step.decoded = decode_latents(model, step.latents);
  return path;
}

EmbeddingBag sentence_bag(const VqModel& model, const std::vector<std::string>& words) {
  const SentenceLatents s = encode_sentence(model, words);
  const std::size_t I = s.quantized.dim(1);
  EmbeddingBag bag;
  for (std::size_t r = 0; r < s.quantized.dim(0); ++r) {
    const auto row = s.quantized.data().subspan(r * I, I);
    bag.emplace_back(row.begin(), row.end());
  }
  return bag;
}

double interpolation_smoothness(const std::vector<std::vector<std::string>>& decoded,
                                const std::vector<EmbeddingBag>& bags) {
  if (decoded.size() != bags.size()) throw ContractError("interpolation_smoothness: decoded and bags differ in size");
  if (decoded.size() < 2) throw ContractError("interpolation_smoothness: path needs at least two steps");
  std::vector<std::size_t> keep{0};
  for (std::size_t s = 1; s < decoded.size(); ++s)
    if (decoded[s] != decoded[keep.back()]) keep.push_back(s);
  if (keep.size() == 1) return 1.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < keep.size(); ++k) total += wmd(bags[keep[k]], bags[keep[k + 1]]).cost;
  const double direct = wmd(bags[keep.front()], bags[keep.back()]).cost;
  if (total <= 0.0) return 1.0;
  return direct / total;
}

double interpolation_smoothness(const VqModel& model, const InterpolationPath& path) {
  std::vector<std::vector<std::string>> decoded;
  std::vector<EmbeddingBag> bags;
  std::map<std::vector<std::string>, EmbeddingBag> cache;
  for (const auto& step : path.steps) {
    decoded.push_back(step.decoded);
    auto it = cache.find(step.decoded);
    if (it == cache.end()) it = cache.emplace(step.decoded, sentence_bag(model, step.decoded)).first;
    bags.push_back(it->second);
  }
  return interpolation_smoothness(decoded, bags);
}

std::string format_path(const InterpolationPath& path) {
  std::string out;
  char buf[32];
  for (const auto& step : path.steps) {
    std::snprintf(buf, sizeof buf, "%.1f", step.t);
    out += buf;
    out += '\t';
    for (std::size_t i = 0; i < step.indices.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(step.indices[i]);
    }
    out += '\t';
    for (std::size_t i = 0; i < step.decoded.size(); ++i) {
      if (i) out += ' ';
      out += step.decoded[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> nearest_entries(const Codebook& cb, std::size_t entry, std::size_t n) {
  if (n == 0 || n > cb.size()) throw ContractError("traverse: n_variants must lie in [1, K]");
  const auto z = cb.entry(entry);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t j = 0; j < cb.size(); ++j)
    if (j != entry) ranked.emplace_back(squared_distance<float>(z, cb.entry(j)), j);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out{entry};
  for (std::size_t k = 0; out.size() < n; ++k) out.push_back(ranked[k].second);
  return out;
}

std::vector<TraversalVariant> traverse_position(const VqModel& model, const std::vector<std::size_t>& indices,
                                                std::size_t position, std::size_t n_variants) {
  if (position >= indices.size()) {
    throw ContractError("traverse: position " + std::to_string(position) + " outside a sequence of " +
                        std::to_string(indices.size()));
  }
  std::vector<TraversalVariant> out;
  for (std::size_t entry : nearest_entries(model.codebook, indices[position], n_variants)) {
    TraversalVariant v;
    v.entry = entry;
    v.indices = indices;
    v.indices[position] = entry;
    v.decoded = decode_indices(model, v.indices);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::size_t> add_and_quantize(const Codebook& cb, const Tensor<float>& a, const Tensor<float>& b) {
  check_latents(a, cb, "latent_arithmetic_add");
  check_latents(b, cb, "latent_arithmetic_add");
  const std::size_t L = std::min(a.dim(0), b.dim(0)), I = cb.width();
  std::vector<std::size_t> idx(L);
  std::vector<float> row(I);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t d = 0; d < I; ++d) row[d] = a.data()[i * I + d] + b.data()[i * I + d];
    idx[i] = nearest_entry<float>(row, cb);
  }
  return idx;
}

std::vector<std::string> latent_arithmetic_add(const VqModel& model, const Tensor<float>& a, const Tensor<float>& b) {
  return decode_indices(model, add_and_quantize(model.codebook, a, b));
}

std::vector<RoleContentStats> disentanglement_stats(const std::vector<AnnotatedLatents>& corpus,
                                                    const Codebook& cb) {
  std::map<std::string, std::pair<std::size_t, std::set<std::size_t>>> groups;
  for (const auto& item : corpus) {
    const auto& s = item.sentence;
    if (s.roles.size() != s.tokens.size()) throw ContractError("disentanglement: roles and tokens differ in length");
    if (item.indices.size() < s.tokens.size()) throw ContractError("disentanglement: fewer codes than tokens");
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      auto& g = groups[to_string(s.roles[i]) + "-" + s.tokens[i]];
      ++g.first;
      g.second.insert(item.indices[i]);
    }
  }
  std::vector<RoleContentStats> out;
  for (const auto& [label, g] : groups) {
    RoleContentStats st;
    st.label = label;
    st.occurrences = g.first;
    st.num_centers = g.second.size();
    const std::vector<std::size_t> centers(g.second.begin(), g.second.end());
    double sum = 0.0, mx = 0.0, mn = std::numeric_limits<double>::infinity();
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < centers.size(); ++a) {
      for (std::size_t b = a + 1; b < centers.size(); ++b) {
        const double d = std::sqrt(squared_distance<float>(cb.entry(centers[a]), cb.entry(centers[b])));
        sum += d;
        mx = std::max(mx, d);
        mn = std::min(mn, d);
        ++pairs;
      }
    }
    if (pairs > 0) {
      st.avg_dis = sum / static_cast<double>(pairs);
      st.max_dis = mx;
      st.min_dis = mn;
    }
    out.push_back(st);
  }
  return out;
}

std::string to_string(SubstitutionOp op) {
  switch (op) {
    case SubstitutionOp::arg_sub: return "arg_sub";
    case SubstitutionOp::verb_sub: return "verb_sub";
    case SubstitutionOp::further_spec: return "further_spec";
    case SubstitutionOp::conjunction: return "conjunction";
  }
  return "";
}

SubstitutionOp substitution_op_from_string(const std::string& s) {
  for (auto op : {SubstitutionOp::arg_sub, SubstitutionOp::verb_sub, SubstitutionOp::further_spec,
                  SubstitutionOp::conjunction})
    if (to_string(op) == s) return op;
  throw InputError("unknown substitution op '" + s + "'");
}

namespace {

const std::set<std::string> kRelationWords{"is", "requires", "causes", "means", "can"};

bool is_argument(Role r) {
  return r == Role::ARG0 || r == Role::ARG1 || r == Role::ARG2;
}

struct Term {
  Span span;
  Role role;
  std::vector<std::string> words;
};

std::vector<Term> role_runs(const AnnotatedSentence& s) {
  std::vector<Term> out;
  for (std::size_t i = 0; i < s.roles.size();) {
    std::size_t j = i;
    while (j < s.roles.size() && s.roles[j] == s.roles[i]) ++j;
    out.push_back({{i, j}, s.roles[i], std::vector<std::string>(s.tokens.begin() + i, s.tokens.begin() + j)});
    i = j;
  }
  return out;
}

// Verb slots are infinitives ("to V") and non-relational predicates.
std::vector<Term> terms(const AnnotatedSentence& s, bool verbs) {
  std::vector<Term> out;
  for (auto& t : role_runs(s)) {
    const bool infinitive = t.span.first > 0 && s.tokens[t.span.first - 1] == "to";
    const bool verb_slot =
        (is_argument(t.role) && infinitive) || (t.role == Role::PRED && !kRelationWords.count(t.words.front()));
    const bool arg_slot = is_argument(t.role) && !infinitive;
    if (verbs ? verb_slot : arg_slot) out.push_back(std::move(t));
  }
  return out;
}

void check_premise(const AnnotatedLatents& p) {
  const auto& s = p.sentence;
  if (s.tokens.empty() || s.roles.size() != s.tokens.size()) throw ContractError("substitute: malformed premise");
  if (p.indices.size() != s.tokens.size() + 1) {
    throw ContractError("substitute: premise needs one code per token plus the end row");
  }
}

void append(std::vector<std::size_t>& out, const std::vector<std::size_t>& src, std::size_t b, std::size_t e) {
  out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(b), src.begin() + static_cast<std::ptrdiff_t>(e));
}

std::vector<std::size_t> substitute_term(const AnnotatedLatents& p1, const AnnotatedLatents& p2, bool verbs) {
  const auto t1 = terms(p1.sentence, verbs), t2 = terms(p2.sentence, verbs);
  const Term* m1 = nullptr;
  const Term* m2 = nullptr;
  for (int pass = 0; pass < 2 && !m1; ++pass) {
    for (const auto& b : t2) {
      for (const auto& a : t1) {
        if (a.words == b.words && ((pass == 0) == (a.role != b.role))) {
          m1 = &a;
          m2 = &b;
          break;
        }
      }
      if (m1) break;
    }
  }
  if (!m1) throw NoAnchorError("substitute: premises share no " + std::string(verbs ? "verb" : "argument"));
  const Term* repl = nullptr;
  for (const auto& a : t1)
    if (a.role == m2->role) {
      repl = &a;
      break;
    }
  if (!repl)
    for (const auto& a : t1)
      if (&a != m1) {
        repl = &a;
        break;
      }
  if (!repl) throw NoAnchorError("substitute: no counterpart span in the first premise");
  std::vector<std::size_t> out;
  append(out, p2.indices, 0, m2->span.first);
  append(out, p1.indices, repl->span.first, repl->span.second);
  append(out, p2.indices, m2->span.second, p2.indices.size());
  return out;
}

std::vector<std::size_t> further_specify(const AnnotatedLatents& p1, const AnnotatedLatents& p2) {
  const auto& s1 = p1.sentence;
  const auto& s2 = p2.sentence;
  bool shared = false;
  for (const auto& a : role_runs(s1))
    for (const auto& b : role_runs(s2))
      shared = shared || (a.role != Role::O && a.role == b.role && a.words == b.words);
  const std::set<Role> present(s2.roles.begin(), s2.roles.end());
  const auto runs = role_runs(s1);
  const Term* extra = nullptr;
  for (const auto& r : runs)
    if (r.role != Role::O && !present.count(r.role)) extra = &r;
  if (!shared || !extra) throw NoAnchorError("further_spec: no specification anchored in the second premise");
  std::size_t begin = extra->span.first;
  while (begin > 0 && s1.roles[begin - 1] == Role::O) --begin;
  std::vector<std::size_t> out;
  append(out, p2.indices, 0, s2.tokens.size());
  append(out, p1.indices, begin, extra->span.second);
  out.push_back(p2.indices.back());
  return out;
}

std::vector<std::size_t> conjoin(const AnnotatedLatents& p1, const AnnotatedLatents& p2, std::size_t and_entry) {
  const auto& a = p1.sentence.tokens;
  const auto& b = p2.sentence.tokens;
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix && a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix])
    ++suffix;
  const std::size_t end1 = a.size() - suffix, end2 = b.size() - suffix;
  if (prefix == 0 || prefix == end1 || prefix == end2) {
    throw NoAnchorError("conjunction: premises do not share a frame with one differing span");
  }
  std::vector<std::size_t> out;
  append(out, p1.indices, 0, end1);
  out.push_back(and_entry);
  append(out, p2.indices, prefix, end2);
  append(out, p1.indices, end1, p1.indices.size());
  return out;
}

}  // namespace

std::vector<std::size_t> substitute(const AnnotatedLatents& p1, const AnnotatedLatents& p2, SubstitutionOp op,
                                    std::size_t and_entry) {
  check_premise(p1);
  check_premise(p2);
  switch (op) {
    case SubstitutionOp::arg_sub: return substitute_term(p1, p2, false);
    case SubstitutionOp::verb_sub: return substitute_term(p1, p2, true);
    case SubstitutionOp::further_spec: return further_specify(p1, p2);
    case SubstitutionOp::conjunction: return conjoin(p1, p2, and_entry);
  }
  return {};
}

SubstitutionResult substitute_and_decode(const VqModel& model, const AnnotatedLatents& p1, const AnnotatedLatents& p2,
                                         SubstitutionOp op, std::size_t and_entry) {
  SubstitutionResult r;
  r.indices = substitute(p1, p2, op, and_entry);
  r.decoded = decode_indices(model, r.indices);
  return r;
}

std::optional<std::vector<std::string>> grammar_conclusion(const AnnotatedSentence& p1, const AnnotatedSentence& p2,
                                                           SubstitutionOp op) {
  const auto a = parse_sentence(p1.tokens);
  const auto b = parse_sentence(p2.tokens);
  if (!a || !b) return std::nullopt;
  auto span_text = [](const AnnotatedSentence& s, Role r, std::size_t which = 0) -> std::string {
    const auto sp = s.spans(r);
    if (which >= sp.size()) return {};
    std::string out;
    for (std::size_t i = sp[which].first; i < sp[which].second; ++i) out += (out.empty() ? "" : " ") + s.tokens[i];
    return out;
  };
  auto pred = [&](const AnnotatedSentence& s, std::size_t which) { return span_text(s, Role::PRED, which); };
  switch (op) {
    case SubstitutionOp::arg_sub:
      if (a->tokens == b->tokens) return b->tokens;
      if (a->template_id == "is-a" && b->template_id == "is-a" &&
          span_text(*a, Role::ARG2) == span_text(*b, Role::ARG1)) {
        return make_is_a(span_text(*a, Role::ARG1), span_text(*b, Role::ARG2)).tokens;
      }
      return std::nullopt;
    case SubstitutionOp::verb_sub:
      if (a->tokens == b->tokens) return b->tokens;
      if (a->template_id == "means-verb" && b->template_id == "requires" &&
          span_text(*a, Role::ARG1) == span_text(*b, Role::ARG2)) {
        return make_requires(span_text(*b, Role::ARG0), span_text(*b, Role::ARG1), span_text(*a, Role::ARG2)).tokens;
      }
      return std::nullopt;
    case SubstitutionOp::further_spec:
      if (a->template_id == "can-in" && b->template_id == "can" && span_text(*a, Role::ARG0) == span_text(*b, Role::ARG0) &&
          pred(*a, 0) == pred(*b, 0)) {
        return a->tokens;
      }
      return std::nullopt;
    case SubstitutionOp::conjunction:
      if (a->template_id == "can" && b->template_id == "can" && span_text(*a, Role::ARG0) == span_text(*b, Role::ARG0) &&
          pred(*a, 0) != pred(*b, 0)) {
        return make_can_and(span_text(*a, Role::ARG0), pred(*a, 0), pred(*b, 0)).tokens;
      }
      return std::nullopt;
  }
  return std::nullopt;
}

std::size_t connective_entry(const VqModel& model) {
  const AnnotatedSentence s = make_can_and("bird", "fly", "swim");
  const auto pos = static_cast<std::size_t>(std::find(s.tokens.begin(), s.tokens.end(), "and") - s.tokens.begin());
  return encode_sentence(model, s.tokens).indices[pos];
}

AnnotatedLatents annotate(const VqModel& model, const AnnotatedSentence& sentence) {
  return {sentence, encode_sentence(model, sentence.tokens).indices};
}

}  // namespace vql
