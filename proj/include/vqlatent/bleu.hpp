#pragma once

#include <string>
#include <vector>

namespace vql {

/// Corpus-level BLEU with uniform weights over 1..max_n grams, clipped
/// n-gram precision and the usual brevity penalty. Returns 0 when any
/// precision is zero.
double corpus_bleu(const std::vector<std::vector<std::string>>& references,
                   const std::vector<std::vector<std::string>>& hypotheses, int max_n);

}  // namespace vql
