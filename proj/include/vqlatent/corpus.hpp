#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqlatent/tokens.hpp"

namespace vql {

enum class Role { ARG0, ARG1, ARG2, PRED, MOD, NEG, O };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

/// Template families of the explanatory-sentence grammar.
enum class Family { is_a, requires_, causes, means, if_then, can };

inline constexpr Family kAllFamilies[] = {Family::is_a,  Family::requires_, Family::causes,
                                          Family::means, Family::if_then,  Family::can};

/// Topic tag of a family: "is-a", "requires", "cause", "mean", "if-then", "can".
std::string topic_tag(Family family);
std::optional<Family> family_from_topic(const std::string& tag);

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<Role> roles;
  std::string template_id;
  std::string topic;

  std::string text() const;
  /// Contiguous spans of tokens carrying `role`, each as [begin, end).
  std::vector<std::pair<std::size_t, std::size_t>> spans(Role role) const;
  bool operator==(const AnnotatedSentence&) const = default;
};

/// Deterministic corpus of `count` sentences. is-a is drawn with twice the
/// weight of each other family.
std::vector<AnnotatedSentence> generate_sentences(std::uint64_t seed, std::size_t count);

/// Individual templates, exposed so tests and experiments can build specific
/// sentences with the grammar's own role assignment.
AnnotatedSentence make_is_a(const std::string& hyponym, const std::string& hypernym);
AnnotatedSentence make_requires(const std::string& subject, const std::string& need, const std::string& verb);
AnnotatedSentence make_causes(const std::string& cause, const std::string& effect);
AnnotatedSentence make_means_noun(const std::string& term, const std::string& meaning);
AnnotatedSentence make_means_verb(const std::string& verb, const std::string& meaning);
AnnotatedSentence make_if_then(const std::string& subject, const std::string& condition, const std::string& result);
AnnotatedSentence make_can(const std::string& agent, const std::string& verb, bool negated = false);
AnnotatedSentence make_can_in(const std::string& agent, const std::string& verb, const std::string& place);
AnnotatedSentence make_can_and(const std::string& agent, const std::string& verb1, const std::string& verb2);

/// Every word the grammar can emit, sorted.
std::vector<std::string> grammar_words();

/// Taxonomy edges (child, parent) used by the is-a family.
const std::vector<std::pair<std::string, std::string>>& taxonomy_edges();
/// Verb pairs (verb, meaning) used by "to V means to W".
const std::vector<std::pair<std::string, std::string>>& verb_synonyms();

/// Relation word of a surface sentence: "is", "requires", "causes", "means",
/// "can" or "if". Sentences outside the grammar fall back to the first
/// relation word they contain; nullopt when there is none.
std::optional<std::string> extract_predicate(const std::vector<std::string>& tokens);

/// Re-annotates a surface sentence by matching it against the templates.
std::optional<AnnotatedSentence> parse_sentence(const std::vector<std::string>& tokens);

enum class MathSplit { EVAL, VAR, EASY, EQ, LEN };

std::string to_string(MathSplit split);
MathSplit math_split_from_string(const std::string& s);

struct MathExpression {
  std::vector<std::string> tokens;
  MathSplit split = MathSplit::EVAL;
  std::vector<std::string> variables;  // distinct, in order of appearance
  std::size_t depth = 0;               // operator-tree depth

  std::string text() const;
};

/// Variable names used by the training (EVAL) distribution.
const std::vector<std::string>& math_training_alphabet();
/// Distinct-variable count range of the training distribution.
inline constexpr std::size_t kMathTrainMinVars = 2;
inline constexpr std::size_t kMathTrainMaxVars = 3;

std::vector<MathExpression> generate_math(std::uint64_t seed, std::size_t count, MathSplit split);

/// Word-level vocabulary; ids 0..3 are reserved for pad/start/end/unk.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Words are assigned ids in lexicographic order starting at 4.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences);
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size() + kNumSpecialIds; }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<TokenId> find(const std::string& word) const;
  TokenId id(const std::string& word) const;  // unk id when absent
  const std::string& word(TokenId id) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

std::vector<std::string> split_words(const std::string& text);

/// [start, ids..., end]; unknown words map to the unk id.
TokenIds tokenize(const std::string& text, const Vocabulary& vocab);
TokenIds tokenize(const std::vector<std::string>& words, const Vocabulary& vocab);
/// Drops special ids and joins words with single spaces.
std::string detokenize(const TokenIds& ids, const Vocabulary& vocab);
std::vector<std::string> detokenize_words(const TokenIds& ids, const Vocabulary& vocab);

/// Encoder input for a sentence: word ids followed by the end id.
TokenIds source_ids(const std::vector<std::string>& words, const Vocabulary& vocab);

// File formats.
std::string format_corpus(const std::vector<AnnotatedSentence>& sentences);
std::vector<AnnotatedSentence> parse_corpus(const std::string& text);
std::string format_math_corpus(const std::vector<MathExpression>& expressions);
std::string format_vocabulary(const Vocabulary& vocab);
Vocabulary parse_vocabulary(const std::string& text);

}  // namespace vql
