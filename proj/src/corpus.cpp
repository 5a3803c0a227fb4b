#include "vqlatent/corpus.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "vqlatent/errors.hpp"

namespace vql {

std::string to_string(Role role) {
  switch (role) {
    case Role::ARG0: return "ARG0";
    case Role::ARG1: return "ARG1";
    case Role::ARG2: return "ARG2";
    case Role::PRED: return "PRED";
    case Role::MOD: return "MOD";
    case Role::NEG: return "NEG";
    case Role::O: return "O";
  }
  return "O";
}

Role role_from_string(const std::string& s) {
  static const std::map<std::string, Role> table{{"ARG0", Role::ARG0}, {"ARG1", Role::ARG1}, {"ARG2", Role::ARG2},
                                                 {"PRED", Role::PRED}, {"MOD", Role::MOD},   {"NEG", Role::NEG},
                                                 {"O", Role::O}};
  auto it = table.find(s);
  if (it == table.end()) throw InputError("unknown role label '" + s + "'");
  return it->second;
}

std::string topic_tag(Family family) {
  switch (family) {
    case Family::is_a: return "is-a";
    case Family::requires_: return "requires";
    case Family::causes: return "cause";
    case Family::means: return "mean";
    case Family::if_then: return "if-then";
    case Family::can: return "can";
  }
  return "";
}

std::optional<Family> family_from_topic(const std::string& tag) {
  for (Family f : kAllFamilies)
    if (topic_tag(f) == tag) return f;
  return std::nullopt;
}

std::string AnnotatedSentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> AnnotatedSentence::spans(Role role) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < roles.size();) {
    if (roles[i] != role) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < roles.size() && roles[j] == role) ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

namespace {

// Lexicon. Taxonomy nouns start with a consonant so that "a" is always the
// right article and argument substitution never needs to change it.
const std::vector<std::pair<std::string, std::vector<std::string>>> kTaxonomyLeaves{
    {"fish", {"shark", "salmon", "trout", "tuna"}},
    {"bird", {"robin", "sparrow", "hawk", "penguin"}},
    {"mammal", {"dog", "cat", "horse", "rabbit"}},
    {"reptile", {"snake", "lizard", "turtle", "gecko"}},
    {"tree", {"pine", "maple", "birch", "willow"}},
    {"flower", {"rose", "tulip", "daisy", "lily"}},
    {"metal", {"copper", "gold", "silver", "zinc"}},
    {"gas", {"nitrogen", "helium", "neon", "hydrogen"}},
    {"planet", {"mars", "venus", "jupiter", "saturn"}},
    {"star", {"sirius", "vega", "polaris", "rigel"}},
    {"tool", {"hammer", "saw", "wrench", "shovel"}},
};

const std::vector<std::pair<std::string, std::vector<std::string>>> kTaxonomyParents{
    {"fish", {"aquatic animal", "animal"}},     {"bird", {"animal", "vertebrate"}},
    {"mammal", {"animal", "vertebrate"}},       {"reptile", {"animal", "cold blooded animal"}},
    {"tree", {"plant", "living thing"}},        {"flower", {"plant", "living thing"}},
    {"metal", {"material", "conductor"}},       {"gas", {"fluid", "substance"}},
    {"planet", {"celestial body", "natural object"}}, {"star", {"celestial body", "light source"}},
    {"tool", {"object", "man made object"}},
};

const std::vector<std::string> kRequireSubjects{"something", "water", "ice",  "sound", "light",
                                                "electricity", "air",  "heat", "matter", "everything"};
const std::vector<std::string> kRequireNeeds{"energy", "force",  "sunlight", "oxygen", "pressure",
                                             "fuel",   "space",  "time",     "friction", "power"};
const std::vector<std::string> kVerbs{"move", "travel", "grow", "develop", "melt", "thaw",  "boil",   "heat",
                                      "burn", "ignite", "flow", "spread",  "change", "vary", "survive", "live"};

const std::vector<std::pair<std::string, std::string>> kVerbSynonyms{
    {"move", "travel"},   {"travel", "move"}, {"grow", "develop"},  {"develop", "grow"}, {"melt", "thaw"},
    {"thaw", "melt"},     {"boil", "heat"},   {"heat", "boil"},     {"burn", "ignite"},  {"ignite", "burn"},
    {"flow", "spread"},   {"spread", "flow"}, {"change", "vary"},   {"vary", "change"},  {"survive", "live"},
    {"live", "survive"}};

const std::vector<std::string> kCauseAgents{"heat",    "friction",  "sunlight", "rain",   "wind",     "gravity",
                                            "pollution", "cold",    "pressure", "lightning", "drought", "fire"};
const std::vector<std::string> kCauseEffects{"evaporation", "melting", "flooding", "growth", "damage", "motion",
                                             "freezing",    "warming", "erosion",  "sound",  "light",  "smoke"};

const std::vector<std::pair<std::string, std::string>> kNounMeanings{
    {"heat", "thermal energy"},        {"weight", "gravitational force"}, {"habitat", "natural home"},
    {"predator", "hunting animal"},    {"prey", "hunted animal"},         {"speed", "distance per time"},
    {"temperature", "heat level"},     {"shelter", "protection"},         {"drought", "dry period"},
    {"melting", "phase change"},       {"erosion", "surface wear"},       {"offspring", "young organism"},
    {"camouflage", "hidden color"},    {"migration", "seasonal travel"},  {"nutrient", "food substance"}};

const std::vector<std::pair<std::string, std::string>> kConditions{
    {"freezes", "expands"}, {"boils", "evaporates"}, {"melts", "flows"},     {"heats", "expands"},
    {"cools", "contracts"}, {"moves", "changes"},    {"burns", "smokes"},    {"condenses", "drips"}};
const std::vector<std::string> kConditionSubjects{"something", "water", "ice", "metal", "air", "wax", "lava", "glass"};

const std::vector<std::string> kAgents{"fish",   "bird",   "dog",  "animal", "organism", "insect",
                                       "frog",   "snake",  "plant", "bat",   "worm",     "penguin"};
const std::vector<std::string> kAgentVerbs{"swim", "fly",  "run",  "breathe", "climb",
                                           "hide", "grow", "move", "eat",     "sleep"};
const std::vector<std::string> kPlaces{"water", "air", "trees", "soil", "caves", "winter"};

const std::vector<std::string>& parents_of(const std::string& mid) {
  for (const auto& [m, parents] : kTaxonomyParents)
    if (m == mid) return parents;
  throw ContractError("taxonomy: no parents for '" + mid + "'");
}

std::string article_for(const std::string& noun) {
  const char c = noun.empty() ? 'x' : noun[0];
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
}

void push(AnnotatedSentence& s, const std::string& words, Role role) {
  std::istringstream is(words);
  std::string w;
  while (is >> w) {
    s.tokens.push_back(w);
    s.roles.push_back(role);
  }
}

template <typename C>
const auto& pick(const C& c, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, c.size() - 1);
  return c[d(rng)];
}

}  // namespace

AnnotatedSentence make_is_a(const std::string& hyponym, const std::string& hypernym) {
  AnnotatedSentence s;
  s.template_id = "is-a";
  s.topic = topic_tag(Family::is_a);
  push(s, "a", Role::O);
  push(s, hyponym, Role::ARG1);
  push(s, "is", Role::PRED);
  push(s, "a kind of", Role::O);
  push(s, hypernym, Role::ARG2);
  return s;
}

AnnotatedSentence make_requires(const std::string& subject, const std::string& need, const std::string& verb) {
  AnnotatedSentence s;
  s.template_id = "requires";
  s.topic = topic_tag(Family::requires_);
  push(s, subject, Role::ARG0);
  push(s, "requires", Role::PRED);
  push(s, need, Role::ARG1);
  push(s, "to", Role::O);
  push(s, verb, Role::ARG2);
  return s;
}

AnnotatedSentence make_causes(const std::string& cause, const std::string& effect) {
  AnnotatedSentence s;
  s.template_id = "causes";
  s.topic = topic_tag(Family::causes);
  push(s, cause, Role::ARG0);
  push(s, "causes", Role::PRED);
  push(s, effect, Role::ARG1);
  return s;
}

AnnotatedSentence make_means_noun(const std::string& term, const std::string& meaning) {
  AnnotatedSentence s;
  s.template_id = "means-noun";
  s.topic = topic_tag(Family::means);
  push(s, term, Role::ARG1);
  push(s, "means", Role::PRED);
  push(s, meaning, Role::ARG2);
  return s;
}

AnnotatedSentence make_means_verb(const std::string& verb, const std::string& meaning) {
  AnnotatedSentence s;
  s.template_id = "means-verb";
  s.topic = topic_tag(Family::means);
  push(s, "to", Role::O);
  push(s, verb, Role::ARG1);
  push(s, "means", Role::PRED);
  push(s, "to", Role::O);
  push(s, meaning, Role::ARG2);
  return s;
}

AnnotatedSentence make_if_then(const std::string& subject, const std::string& condition, const std::string& result) {
  AnnotatedSentence s;
  s.template_id = "if-then";
  s.topic = topic_tag(Family::if_then);
  push(s, "if", Role::O);
  push(s, subject, Role::ARG0);
  push(s, condition, Role::PRED);
  push(s, "then", Role::O);
  push(s, subject, Role::ARG0);
  push(s, result, Role::PRED);
  return s;
}

AnnotatedSentence make_can(const std::string& agent, const std::string& verb, bool negated) {
  AnnotatedSentence s;
  s.template_id = negated ? "can-not" : "can";
  s.topic = topic_tag(Family::can);
  push(s, article_for(agent), Role::O);
  push(s, agent, Role::ARG0);
  push(s, "can", Role::MOD);
  if (negated) push(s, "not", Role::NEG);
  push(s, verb, Role::PRED);
  return s;
}

AnnotatedSentence make_can_in(const std::string& agent, const std::string& verb, const std::string& place) {
  AnnotatedSentence s = make_can(agent, verb, false);
  s.template_id = "can-in";
  push(s, "in", Role::O);
  push(s, place, Role::ARG2);
  return s;
}

AnnotatedSentence make_can_and(const std::string& agent, const std::string& verb1, const std::string& verb2) {
  AnnotatedSentence s = make_can(agent, verb1, false);
  s.template_id = "can-and";
  push(s, "and", Role::O);
  push(s, verb2, Role::PRED);
  return s;
}

const std::vector<std::pair<std::string, std::string>>& taxonomy_edges() {
  static const auto edges = [] {
    std::vector<std::pair<std::string, std::string>> e;
    for (const auto& [mid, leaves] : kTaxonomyLeaves)
      for (const auto& leaf : leaves) e.emplace_back(leaf, mid);
    for (const auto& [mid, parents] : kTaxonomyParents)
      for (const auto& parent : parents) e.emplace_back(mid, parent);
    return e;
  }();
  return edges;
}

const std::vector<std::pair<std::string, std::string>>& verb_synonyms() {
  return kVerbSynonyms;
}

std::vector<std::string> grammar_words() {
  std::set<std::string> w{"a", "an", "is", "kind", "of", "requires", "to", "causes", "means", "if", "then",
                          "can", "not", "in", "and"};
  auto add = [&w](const std::string& phrase) {
    for (const auto& t : split_words(phrase)) w.insert(t);
  };
  for (const auto& [mid, leaves] : kTaxonomyLeaves) {
    add(mid);
    for (const auto& l : leaves) add(l);
  }
  for (const auto& [mid, parents] : kTaxonomyParents)
    for (const auto& p : parents) add(p);
  for (const auto* list : {&kRequireSubjects, &kRequireNeeds, &kVerbs, &kCauseAgents, &kCauseEffects,
                           &kConditionSubjects, &kAgents, &kAgentVerbs, &kPlaces})
    for (const auto& x : *list) add(x);
  for (const auto* pairs : {&kVerbSynonyms, &kNounMeanings, &kConditions})
    for (const auto& [a, b] : *pairs) {
      add(a);
      add(b);
    }
  return std::vector<std::string>(w.begin(), w.end());
}

std::vector<AnnotatedSentence> generate_sentences(std::uint64_t seed, std::size_t count) {
  if (count == 0) throw ContractError("generate_sentences: count must be positive");
  std::mt19937_64 rng(seed);
  // is-a carries the substitution chains and gets double weight.
  std::discrete_distribution<int> family_dist({2, 1, 1, 1, 1, 1});
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<AnnotatedSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    switch (kAllFamilies[family_dist(rng)]) {
      case Family::is_a: {
        // Edges of the transitive closure: leaf-mid, leaf-top and mid-top.
        const double r = coin(rng);
        if (r < 0.4) {
          const auto& [mid, leaves] = pick(kTaxonomyLeaves, rng);
          out.push_back(make_is_a(pick(leaves, rng), mid));
        } else if (r < 0.7) {
          const auto& [mid, leaves] = pick(kTaxonomyLeaves, rng);
          const auto& leaf = pick(leaves, rng);
          out.push_back(make_is_a(leaf, pick(parents_of(mid), rng)));
        } else {
          const auto& [mid, parents] = pick(kTaxonomyParents, rng);
          out.push_back(make_is_a(mid, pick(parents, rng)));
        }
        break;
      }
      case Family::requires_: {
        const auto& subject = pick(kRequireSubjects, rng);
        const auto& need = pick(kRequireNeeds, rng);
        out.push_back(make_requires(subject, need, pick(kVerbs, rng)));
        break;
      }
      case Family::causes: {
        const auto& agent = pick(kCauseAgents, rng);
        out.push_back(make_causes(agent, pick(kCauseEffects, rng)));
        break;
      }
      case Family::means: {
        if (coin(rng) < 0.5) {
          const auto& [term, meaning] = pick(kNounMeanings, rng);
          out.push_back(make_means_noun(term, meaning));
        } else {
          const auto& [verb, meaning] = pick(kVerbSynonyms, rng);
          out.push_back(make_means_verb(verb, meaning));
        }
        break;
      }
      case Family::if_then: {
        const auto& subject = pick(kConditionSubjects, rng);
        const auto& [cond, result] = pick(kConditions, rng);
        out.push_back(make_if_then(subject, cond, result));
        break;
      }
      case Family::can: {
        // Half of the agents are animal leaves (the first four mids) so that leaves
        // also occur outside is-a.
        std::string agent = pick(kAgents, rng);
        if (coin(rng) < 0.5) agent = pick(kTaxonomyLeaves[std::uniform_int_distribution<std::size_t>(0, 3)(rng)].second, rng);
        const auto& verb = pick(kAgentVerbs, rng);
        const double r = coin(rng);
        if (r < 0.3) {
          out.push_back(make_can(agent, verb, false));
        } else if (r < 0.5) {
          out.push_back(make_can(agent, verb, true));
        } else if (r < 0.75) {
          out.push_back(make_can_in(agent, verb, pick(kPlaces, rng)));
        } else {
          std::string other = pick(kAgentVerbs, rng);
          while (other == verb) other = pick(kAgentVerbs, rng);
          out.push_back(make_can_and(agent, verb, other));
        }
        break;
      }
    }
  }
  return out;
}

namespace {

std::string join(const std::vector<std::string>& t, std::size_t b, std::size_t e) {
  std::string s;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) s += ' ';
    s += t[i];
  }
  return s;
}

std::ptrdiff_t find_word(const std::vector<std::string>& t, const std::string& w) {
  auto it = std::find(t.begin(), t.end(), w);
  return it == t.end() ? -1 : it - t.begin();
}

}  // namespace

std::optional<AnnotatedSentence> parse_sentence(const std::vector<std::string>& t) {
  const std::size_t n = t.size();
  if (n < 3) return std::nullopt;
  // is-a: a X is a kind of Y
  if (n >= 7 && t[0] == "a" && t[2] == "is" && t[3] == "a" && t[4] == "kind" && t[5] == "of") {
    return make_is_a(t[1], join(t, 6, n));
  }
  if (n == 5 && t[1] == "requires" && t[3] == "to") return make_requires(t[0], t[2], t[4]);
  if (n == 5 && t[0] == "to" && t[2] == "means" && t[3] == "to") return make_means_verb(t[1], t[4]);
  if (n == 6 && t[0] == "if" && t[3] == "then" && t[1] == t[4]) return make_if_then(t[1], t[2], t[5]);
  if (const auto c = find_word(t, "causes"); c > 0 && static_cast<std::size_t>(c) + 1 < n) {
    return make_causes(join(t, 0, static_cast<std::size_t>(c)), join(t, static_cast<std::size_t>(c) + 1, n));
  }
  if (const auto m = find_word(t, "means"); m > 0 && static_cast<std::size_t>(m) + 1 < n && t[0] != "to") {
    return make_means_noun(join(t, 0, static_cast<std::size_t>(m)), join(t, static_cast<std::size_t>(m) + 1, n));
  }
  if (n >= 4 && (t[0] == "a" || t[0] == "an") && t[2] == "can" && t[0] == article_for(t[1])) {
    if (n == 4) return make_can(t[1], t[3], false);
    if (n == 5 && t[3] == "not") return make_can(t[1], t[4], true);
    if (n == 6 && t[4] == "in") return make_can_in(t[1], t[3], t[5]);
    if (n == 6 && t[4] == "and") return make_can_and(t[1], t[3], t[5]);
  }
  return std::nullopt;
}

std::optional<std::string> extract_predicate(const std::vector<std::string>& tokens) {
  if (const auto parsed = parse_sentence(tokens)) {
    if (parsed->template_id == "if-then") return std::string("if");
    if (parsed->template_id.starts_with("can")) return std::string("can");
    for (std::size_t i = 0; i < parsed->roles.size(); ++i)
      if (parsed->roles[i] == Role::PRED) return parsed->tokens[i];
  }
  static const std::set<std::string> lexicon{"means", "causes", "requires", "is", "can", "if"};
  for (const auto& w : tokens)
    if (lexicon.count(w)) return w;
  return std::nullopt;
}

std::string to_string(MathSplit split) {
  switch (split) {
    case MathSplit::EVAL: return "EVAL";
    case MathSplit::VAR: return "VAR";
    case MathSplit::EASY: return "EASY";
    case MathSplit::EQ: return "EQ";
    case MathSplit::LEN: return "LEN";
  }
  return "EVAL";
}

MathSplit math_split_from_string(const std::string& s) {
  for (MathSplit m : {MathSplit::EVAL, MathSplit::VAR, MathSplit::EASY, MathSplit::EQ, MathSplit::LEN})
    if (to_string(m) == s) return m;
  throw InputError("unknown math split '" + s + "'");
}

std::string MathExpression::text() const {
  return join(tokens, 0, tokens.size());
}

const std::vector<std::string>& math_training_alphabet() {
  static const std::vector<std::string> a{"a", "b", "c", "n", "x", "y", "z", "U", "A", "B", "E", "F"};
  return a;
}

namespace {

const std::vector<std::string> kGreek{"\\alpha", "\\beta", "\\gamma", "\\delta",
                                      "\\theta", "\\phi",  "\\psi",   "\\omega"};
const std::vector<std::string> kFunctions{"\\cos", "\\sin", "\\exp", "\\log"};
const std::vector<std::string> kBinaryOps{"+", "-", "\\cdot"};

struct Built {
  std::vector<std::string> tokens;
  std::size_t depth = 0;
  bool compound = false;
};

Built build_expression(const std::vector<std::string>& vars, std::size_t begin, std::size_t end,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (end - begin == 1) {
    Built b;
    if (coin(rng) < 0.5) {
      b.tokens = {pick(kFunctions, rng), "(", vars[begin], ")"};
      b.depth = 1;
    } else {
      b.tokens = {vars[begin]};
    }
    return b;
  }
  std::uniform_int_distribution<std::size_t> split_at(begin + 1, end - 1);
  const std::size_t mid = split_at(rng);
  Built left = build_expression(vars, begin, mid, rng);
  Built right = build_expression(vars, mid, end, rng);
  Built b;
  b.tokens = left.tokens;
  b.tokens.push_back(pick(kBinaryOps, rng));
  if (right.compound) b.tokens.push_back("(");
  b.tokens.insert(b.tokens.end(), right.tokens.begin(), right.tokens.end());
  if (right.compound) b.tokens.push_back(")");
  b.depth = 1 + std::max(left.depth, right.depth);
  b.compound = true;
  return b;
}

std::vector<std::string> sample_distinct(const std::vector<std::string>& pool, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::string> p = pool;
  std::shuffle(p.begin(), p.end(), rng);
  p.resize(k);
  return p;
}

}  // namespace

std::vector<MathExpression> generate_math(std::uint64_t seed, std::size_t count, MathSplit split) {
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(split) + 1)));
  std::vector<MathExpression> out;
  out.reserve(count);
  const auto& train = math_training_alphabet();
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t nvars;
    switch (split) {
      case MathSplit::EASY: nvars = kMathTrainMinVars - 1; break;
      case MathSplit::LEN: nvars = std::uniform_int_distribution<std::size_t>(kMathTrainMaxVars + 1, kMathTrainMaxVars + 2)(rng); break;
      default: nvars = std::uniform_int_distribution<std::size_t>(kMathTrainMinVars, kMathTrainMaxVars)(rng); break;
    }
    const auto& alphabet = split == MathSplit::VAR ? kGreek : train;
    MathExpression e;
    e.split = split;
    e.variables = sample_distinct(alphabet, nvars, rng);
    Built b = build_expression(e.variables, 0, nvars, rng);
    e.tokens = std::move(b.tokens);
    e.depth = b.depth;
    if (split == MathSplit::EQ) {
      std::vector<std::string> lhs_pool;
      for (const auto& v : train)
        if (std::find(e.variables.begin(), e.variables.end(), v) == e.variables.end()) lhs_pool.push_back(v);
      e.tokens.insert(e.tokens.begin(), {pick(lhs_pool, rng), "="});
    }
    out.push_back(std::move(e));
  }
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences) {
  std::set<std::string> words;
  for (const auto& s : sentences) words.insert(s.begin(), s.end());
  return from_words(std::vector<std::string>(words.begin(), words.end()));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    const auto [it, inserted] = v.index_.emplace(v.words_[i], static_cast<TokenId>(i) + kNumSpecialIds);
    if (!inserted) throw InputError("vocabulary: duplicate word '" + v.words_[i] + "'");
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(const std::string& word) const {
  return find(word).value_or(kUnkId);
}

const std::string& Vocabulary::word(TokenId id) const {
  static const std::string specials[] = {"<pad>", "<s>", "</s>", "<unk>"};
  if (id >= 0 && id < kNumSpecialIds) return specials[id];
  const auto idx = static_cast<std::size_t>(id - kNumSpecialIds);
  if (id < 0 || idx >= words_.size()) throw InputError("vocabulary: id " + std::to_string(id) + " out of range");
  return words_[idx];
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

TokenIds tokenize(const std::vector<std::string>& words, const Vocabulary& vocab) {
  TokenIds ids{kStartId};
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.push_back(kEndId);
  return ids;
}

TokenIds tokenize(const std::string& text, const Vocabulary& vocab) {
  return tokenize(split_words(text), vocab);
}

std::vector<std::string> detokenize_words(const TokenIds& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kPadId || id == kStartId || id == kEndId) {
      continue;
    }
    out.push_back(vocab.word(id));
  }
  return out;
}

std::string detokenize(const TokenIds& ids, const Vocabulary& vocab) {
  const auto w = detokenize_words(ids, vocab);
  return join(w, 0, w.size());
}

TokenIds source_ids(const std::vector<std::string>& words, const Vocabulary& vocab) {
  TokenIds ids;
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.push_back(kEndId);
  return ids;
}

std::string format_corpus(const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out += ' ';
      out += s.tokens[i] + "/" + to_string(s.roles[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedSentence> parse_corpus(const std::string& text) {
  std::vector<AnnotatedSentence> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    AnnotatedSentence s;
    for (const auto& pair : split_words(line)) {
      const auto slash = pair.rfind('/');
      if (slash == std::string::npos || slash == 0) {
        throw InputError("corpus line " + std::to_string(lineno) + ": expected token/ROLE, got '" + pair + "'");
      }
      s.tokens.push_back(pair.substr(0, slash));
      s.roles.push_back(role_from_string(pair.substr(slash + 1)));
    }
    if (const auto parsed = parse_sentence(s.tokens)) {
      s.template_id = parsed->template_id;
      s.topic = parsed->topic;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_math_corpus(const std::vector<MathExpression>& expressions) {
  std::string out;
  for (const auto& e : expressions) out += e.text() + "\t" + to_string(e.split) + "\n";
  return out;
}

std::string format_vocabulary(const Vocabulary& vocab) {
  std::string out;
  for (const auto& w : vocab.words()) out += w + "\n";
  return out;
}

Vocabulary parse_vocabulary(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) words.push_back(line);
  }
  return Vocabulary::from_words(std::move(words));
}

}  // namespace vql
