#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vqlatent/codebook.hpp"
#include "vqlatent/corpus.hpp"
#include "vqlatent/transport.hpp"
#include "vqlatent/vqmodel.hpp"

namespace vql {

// ---- Interpolation ---------------------------------------------------------

struct InterpolationStep {
  double t = 0.0;
  Tensor<float> latents;             // [L x I], codebook rows
  std::vector<std::size_t> indices;  // [L]
  std::vector<std::string> decoded;  // empty until decoded
};

struct InterpolationPath {
  std::vector<InterpolationStep> steps;
  double step_size = 0.1;
};

/// Codebook walk from `source` to `target` (both [L x I] codebook rows). At
/// each t the entry for slot i is argmin_j (1-t)|z_prev_i - z^j| + t|z2_i - z^j|
/// with z_prev the previous step's entry; ties go to the lowest index. With
/// `pad` the shorter sequence is extended by repeating its last (end-token)
/// row; without it unequal lengths are a contract error.
InterpolationPath interpolate_codes(const Codebook& codebook, const Tensor<float>& source, const Tensor<float>& target,
                                    double step_size = 0.1, bool pad = true);

/// `interpolate_codes` followed by greedy decoding of every step.
InterpolationPath interpolate(const VqModel& model, const Tensor<float>& source, const Tensor<float>& target,
                              double step_size = 0.1, bool pad = true);

/// Embedding bag of a surface sentence: its quantized latents after
/// re-encoding (word rows and the end row).
EmbeddingBag sentence_bag(const VqModel& model, const std::vector<std::string>& words);

/// wmd(s_0, s_T) / sum_t wmd(s_t, s_t+1) over the decoded sentences, with
/// consecutive duplicates collapsed. A path that never changes gives 1.0.
double interpolation_smoothness(const std::vector<std::vector<std::string>>& decoded,
                                const std::vector<EmbeddingBag>& bags);
double interpolation_smoothness(const VqModel& model, const InterpolationPath& path);

/// One line per step: "t<TAB>i0,i1,...<TAB>decoded sentence".
std::string format_path(const InterpolationPath& path);

// ---- Traversal and arithmetic -----------------------------------------------

struct TraversalVariant {
  std::size_t entry = 0;             // codebook index placed at the position
  std::vector<std::size_t> indices;  // full latent sequence
  std::vector<std::string> decoded;
};

/// The `n_variants` entries nearest to the code at `position` (the code itself
/// first, then increasing distance, ties by index), each substituted at that
/// position alone.
std::vector<std::size_t> nearest_entries(const Codebook& codebook, std::size_t entry, std::size_t n);
std::vector<TraversalVariant> traverse_position(const VqModel& model, const std::vector<std::size_t>& indices,
                                                std::size_t position, std::size_t n_variants);

/// Row-wise sum over the common length, re-quantized to nearest entries.
std::vector<std::size_t> add_and_quantize(const Codebook& codebook, const Tensor<float>& a, const Tensor<float>& b);
std::vector<std::string> latent_arithmetic_add(const VqModel& model, const Tensor<float>& a, const Tensor<float>& b);

// ---- Disentanglement ---------------------------------------------------------

struct RoleContentStats {
  std::string label;  // e.g. "PRED-is"
  std::size_t occurrences = 0;
  std::size_t num_centers = 0;
  double avg_dis = 0.0, max_dis = 0.0, min_dis = 0.0;
};

struct AnnotatedLatents {
  AnnotatedSentence sentence;
  std::vector<std::size_t> indices;  // one per token; an extra end row is ignored
};

/// Per role-content pair: distinct codebook indices among its occurrences and
/// the pairwise Euclidean distances between those distinct entries. Sorted by
/// label.
std::vector<RoleContentStats> disentanglement_stats(const std::vector<AnnotatedLatents>& corpus,
                                                    const Codebook& codebook);

// ---- Substitution inference --------------------------------------------------

enum class SubstitutionOp { arg_sub, verb_sub, further_spec, conjunction };

std::string to_string(SubstitutionOp op);
SubstitutionOp substitution_op_from_string(const std::string& s);

using Span = std::pair<std::size_t, std::size_t>;  // [begin, end) over tokens

struct SubstitutionResult {
  std::vector<std::size_t> indices;
  std::vector<std::string> decoded;
};

/// Latent-sequence edit for `op` (no decoding). `p1` and `p2` carry one index
/// per token plus the end row.
///   arg_sub / verb_sub: the span of p2 holding a term shared with p1 is
///     replaced by p1's span with that role; matches whose roles differ
///     between the premises are preferred.
///   further_spec: p1's trailing span with a role absent from p2 (and the
///     function words leading into it) is inserted before p2's end row.
///   conjunction: p1 and p2 share a frame and differ in one span; the result
///     is p1 with "and" followed by p2's span inserted after p1's span.
/// `and_entry` is the code of the connective and is only read by
/// conjunction. Throws NoAnchorError when the premises have nothing to align.
std::vector<std::size_t> substitute(const AnnotatedLatents& p1, const AnnotatedLatents& p2, SubstitutionOp op,
                                    std::size_t and_entry = 0);

SubstitutionResult substitute_and_decode(const VqModel& model, const AnnotatedLatents& p1, const AnnotatedLatents& p2,
                                         SubstitutionOp op, std::size_t and_entry = 0);

/// Conclusion the grammar licenses for (p1, p2, op), or nullopt.
std::optional<std::vector<std::string>> grammar_conclusion(const AnnotatedSentence& p1, const AnnotatedSentence& p2,
                                                           SubstitutionOp op);

/// Code of the word "and" taken from encoding a grammar sentence that uses it.
std::size_t connective_entry(const VqModel& model);

AnnotatedLatents annotate(const VqModel& model, const AnnotatedSentence& sentence);

}  // namespace vql
