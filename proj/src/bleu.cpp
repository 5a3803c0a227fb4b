#include "vqlatent/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vqlatent/errors.hpp"

namespace vql {

namespace {

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& s, int n) {
  std::map<std::vector<std::string>, long> counts;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= s.size(); ++i) ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + un)];
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<std::string>>& references,
                   const std::vector<std::vector<std::string>>& hypotheses, int max_n) {
  if (references.size() != hypotheses.size()) throw ContractError("bleu: reference and hypothesis counts differ");
  if (max_n < 1) throw ContractError("bleu: max_n must be at least 1");
  double log_precision = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long matched = 0, total = 0;
    for (std::size_t i = 0; i < references.size(); ++i) {
      const auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, c] : ngram_counts(hypotheses[i], n)) {
        total += c;
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(c, it->second);
      }
    }
    if (matched == 0 || total == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched) / static_cast<double>(total)) / max_n;
  }
  std::size_t ref_len = 0, hyp_len = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    ref_len += references[i].size();
    hyp_len += hypotheses[i].size();
  }
  const double bp =
      hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_precision);
}

}  // namespace vql
