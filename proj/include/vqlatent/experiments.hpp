#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqlatent/geometry.hpp"
#include "vqlatent/trainer.hpp"
#include "vqlatent/tree.hpp"

namespace vql {

// Shared set-ups for the command line tool and the acceptance suite.

/// Vocabulary over every word the grammar can produce.
Vocabulary grammar_vocabulary();

/// `count` grammar sentences that always contain "a shark is a kind of fish"
/// and "a fish is a kind of aquatic animal" (replacing the last draws when
/// the generator did not produce them).
std::vector<AnnotatedSentence> fixture_corpus(std::uint64_t seed, std::size_t count);

std::vector<std::vector<std::string>> words_of(const std::vector<AnnotatedSentence>& corpus);

/// Schedule that reaches the reconstruction targets on the 500-sentence fixture.
TrainConfig fixture_train_config();

/// Ten sentences (the pinned shark/fish pair among them) and the schedule
/// that memorizes them.
std::vector<AnnotatedSentence> memorization_corpus();
TrainConfig memorization_train_config();

// ---- Interpolation smoothness ------------------------------------------------

struct SmoothnessReport {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<InterpolationPath> paths;
  std::vector<double> values;
  double mean = 0.0, max = 0.0, min = 0.0;
};

/// Uniformly sampled (source, target) pairs of distinct sentences, or each
/// sentence paired with itself when `same` is set.
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed,
                                                              bool same = false);

SmoothnessReport run_interpolation(const VqModel& model, const std::vector<std::vector<std::string>>& sentences,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                   double step_size = 0.1);

// ---- Region control -----------------------------------------------------------

enum class RegionKind { topic, predicate, argument };

/// Two regions of the corpus: label 0 is the source, label 1 the target.
struct RegionSpec {
  RegionKind kind = RegionKind::predicate;
  std::string source = "causes";
  std::string target = "means";
};

/// "topic" (if-then -> is-a), "predicate" (causes -> means) or "argument"
/// (water -> something).
RegionSpec region_spec_from_string(const std::string& name);
std::string to_string(RegionKind kind);

/// Feature of a surface sentence that the region is defined by.
std::optional<std::string> region_feature(const RegionSpec& spec, const std::vector<std::string>& words);
std::optional<int> region_label(const RegionSpec& spec, const std::vector<std::string>& words);

struct TreeExperiment {
  DecisionTree tree;
  TreeMetrics train_metrics, heldout_metrics;
  TreePath path;
  std::vector<std::vector<std::string>> moved;  // source-region sentences that were moved
  std::vector<GuidedMove> moves;
  double consistency = 0.0;
};

/// Fits a tree on pooled latents of the labelled corpus sentences (80/20
/// train/held-out split), extracts the path to the target region and moves
/// `n_moves` distinct source-region sentences along it (corpus sentences
/// first, then fresh grammar sentences).
TreeExperiment run_tree_experiment(const VqModel& model, const std::vector<AnnotatedSentence>& corpus,
                                   const RegionSpec& spec, std::size_t n_moves, std::uint64_t seed,
                                   std::size_t max_depth = 6, std::size_t min_leaf = 5);

// ---- Substitution inference ------------------------------------------------

struct SubstitutionInstance {
  AnnotatedSentence p1, p2;
  SubstitutionOp op = SubstitutionOp::arg_sub;
  std::vector<std::string> expected;
};

/// Premise pairs from `corpus` whose conclusion the grammar licenses:
/// is-a chains for arg_sub and verb definitions feeding "requires" sentences
/// for verb_sub, alternating between the two while both last.
std::vector<SubstitutionInstance> substitution_instances(const std::vector<AnnotatedSentence>& corpus,
                                                         std::size_t count, std::uint64_t seed);

struct InferenceReport {
  std::vector<std::vector<std::string>> outputs;
  std::vector<bool> exact;
  double exact_match = 0.0;
};

InferenceReport run_inference(const VqModel& model, const std::vector<SubstitutionInstance>& instances);

}  // namespace vql
