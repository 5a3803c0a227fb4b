// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [report-path]
//
// The exit status is 0 when every criterion was evaluated, whatever the
// verdicts; it is nonzero only when the run itself breaks.

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "codebook_checks.hpp"
#include "geometry_checks.hpp"
#include "gradient_suite.hpp"
#include "support.hpp"
#include "tree_checks.hpp"
#include "vqlatent/errors.hpp"
#include "vqlatent/experiments.hpp"
#include "vqlatent/fileio.hpp"
#include "vqlatent/run_config.hpp"

using namespace vql;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr std::size_t kGradShapes = 20;
constexpr double kGradBudgetSec = 120;
constexpr std::size_t kOracleCases = 1000;
constexpr double kClusterTol = 0.05;
constexpr double kClusterBudgetSec = 30;
constexpr double kKlExpected = 9.2103;
constexpr double kKlTol = 1e-4;
constexpr double kUniformTol = 0.02;
constexpr double kModeRate = 0.999;
constexpr double kTokenAcc = 0.95;
constexpr double kExactMatch = 0.80;
constexpr std::size_t kMaxEpochs = 50;
constexpr double kFixtureBudgetSec = 30 * 60;
constexpr double kMemorizeBudgetSec = 120;
constexpr std::size_t kInterpPairs = 100;
constexpr double kIsSlack = 1e-9;
constexpr double kWmdTol = 1e-9;
constexpr std::size_t kCartCases = 50;
constexpr double kSeparability = 0.95;
constexpr double kConsistency = 0.60;
constexpr std::size_t kMoves = 100;
constexpr std::size_t kInferInstances = 100;
constexpr double kInferExact = 0.8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

class Report {
 public:
  void criterion(int id, const std::string& title, bool pass, const std::vector<std::string>& details) {
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << " " << std::setw(2) << id << " " << title << "\n";
    for (const auto& d : details) line << "     " << d << "\n";
    std::cout << line.str() << std::flush;
    text_ += line.str();
    ++(pass ? passed_ : failed_);
  }
  std::string summary() const {
    return "passed " + std::to_string(passed_) + " failed " + std::to_string(failed_) + "\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  int passed_ = 0, failed_ = 0;
};

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::vector<std::size_t> padded(std::vector<std::size_t> idx, std::size_t len) {
  while (idx.size() < len) idx.push_back(idx.back());
  return idx;
}

// ---- individual criteria ---------------------------------------------------------

void gradients(Report& rep) {
  const auto t0 = Clock::now();
  const auto results = vqtest::run_gradient_suite(kGradShapes, 101);
  const double secs = seconds_since(t0);
  bool pass = secs < kGradBudgetSec;
  std::vector<std::string> details;
  for (const auto& r : results) {
    const bool ok = r.cases >= kGradShapes && r.max_rel < kGradRelTol && r.kinks * 100 < r.checked;
    pass = pass && ok;
    details.push_back(r.name + ": shapes " + std::to_string(r.cases) + ", coords " + std::to_string(r.checked) +
                      ", kinks " + std::to_string(r.kinks) + ", max rel " + num(r.max_rel, 3) + (ok ? "" : "  <--"));
  }
  details.insert(details.begin(), "ops " + std::to_string(results.size()) + ", tol " + num(kGradRelTol) + ", " +
                                      num(secs, 3) + " s (budget " + num(kGradBudgetSec) + " s)");
  rep.criterion(1, "gradients match central differences", pass, details);
}

void quantizer_oracle(Report& rep) {
  const auto r = vqtest::run_quantizer_oracle(kOracleCases, 102);
  rep.criterion(2, "nearest-entry quantizer equals brute force", r.cases == kOracleCases && r.mismatches == 0 && r.tie_rows > 0,
                {"cases " + std::to_string(r.cases) + ", rows " + std::to_string(r.rows) + ", tied rows " +
                 std::to_string(r.tie_rows) + ", mismatches " + std::to_string(r.mismatches)});
}

void ema_convergence(Report& rep) {
  const auto t0 = Clock::now();
  const auto r = vqtest::run_planted_clusters(103, 200);
  const double secs = seconds_since(t0);
  rep.criterion(3, "EMA codebook recovers planted clusters",
                r.bijective && r.max_distance < kClusterTol && r.min_separation >= 1.0 && secs < kClusterBudgetSec,
                {"bijective " + std::string(r.bijective ? "yes" : "no") + ", max distance " + num(r.max_distance, 4) +
                     " (tol " + num(kClusterTol) + "), min separation " + num(r.min_separation, 4),
                 num(secs, 3) + " s (budget " + num(kClusterBudgetSec) + " s)"});
}

void kl_constant(Report& rep) {
  const double kl = uniform_prior_kl(10000);
  bool logk = true;
  for (std::size_t k : {1, 2, 8, 512}) logk = logk && std::abs(uniform_prior_kl(k) - std::log(static_cast<double>(k))) < 1e-12;
  rep.criterion(4, "uniform-prior KL is log K", std::abs(kl - kKlExpected) < kKlTol && logk,
                {"K=10000: " + num(kl, 8) + " (expected " + num(kKlExpected) + " +/- " + num(kKlTol) + ")",
                 std::string("log K for K in {1,2,8,512}: ") + (logk ? "yes" : "no")});
}

void gumbel(Report& rep) {
  const auto r = vqtest::run_gumbel_checks(105, 100000, 10000);
  rep.criterion(5, "Gumbel selection properties",
                r.tau_invariant && r.max_uniform_deviation <= kUniformTol && r.mode_rate >= kModeRate,
                {std::string("argmax invariant to tau: ") + (r.tau_invariant ? "yes" : "no"),
                 "uniform K=4, 1e5 draws: max |freq - 1/4| " + num(r.max_uniform_deviation, 4) + " (tol " +
                     num(kUniformTol) + ")",
                 "near one-hot, 1e4 draws: mode rate " + num(r.mode_rate, 5) + " (min " + num(kModeRate) + ")"});
}

struct Fixture {
  std::vector<AnnotatedSentence> corpus;
  std::vector<std::vector<std::string>> words;
  VqModel model;
};

Fixture training(Report& rep) {
  const auto corpus = fixture_corpus(5, 500);
  Fixture f{corpus, words_of(corpus), init_model(grammar_vocabulary(), ModelConfig{}, QuantizerConfig{}, 3)};
  const TrainConfig cfg = fixture_train_config();
  auto t0 = Clock::now();
  train(f.model, f.words, cfg);
  const double secs = seconds_since(t0);
  const auto rec = evaluate_reconstruction(f.model, f.words);

  VqModel mem = init_model(grammar_vocabulary(), ModelConfig{}, QuantizerConfig{}, 3);
  const auto mem_words = words_of(memorization_corpus());
  t0 = Clock::now();
  train(mem, mem_words, memorization_train_config());
  const double mem_secs = seconds_since(t0);
  const double mem_exact = evaluate_reconstruction(mem, mem_words).exact_match;

  const bool pass = cfg.epochs <= kMaxEpochs && rec.token_accuracy >= kTokenAcc && rec.exact_match >= kExactMatch &&
                    secs < kFixtureBudgetSec && mem_exact == 1.0 && mem_secs < kMemorizeBudgetSec;
  rep.criterion(6, "reconstruction on the toy fixtures", pass,
                {"500 sentences, " + std::to_string(cfg.epochs) + " epochs, " + num(secs, 4) + " s: token accuracy " +
                     num(rec.token_accuracy, 4) + " (min " + num(kTokenAcc) + "), exact match " +
                     num(rec.exact_match, 4) + " (min " + num(kExactMatch) + "), BLEU-4 " + num(rec.bleu[3], 4),
                 std::to_string(mem_words.size()) + " sentences memorized: exact match " + num(mem_exact, 4) + " in " +
                     num(mem_secs, 3) + " s (budget " + num(kMemorizeBudgetSec) + " s)"});
  return f;
}

void interpolation(Report& rep, const Fixture& f) {
  const auto& cb = f.model.codebook;
  const auto pairs = sample_pairs(f.words.size(), kInterpPairs, 107);
  const auto r = run_interpolation(f.model, f.words, pairs);

  std::size_t off_codebook = 0, bad_endpoints = 0, over = 0;
  for (std::size_t p = 0; p < r.paths.size(); ++p) {
    const auto& steps = r.paths[p].steps;
    for (const auto& st : steps)
      for (std::size_t i = 0; i < st.indices.size(); ++i) {
        const auto row = cb.entry(st.indices[i]);
        if (std::memcmp(row.data(), st.latents.data().data() + i * cb.width(), cb.width() * sizeof(float)) != 0)
          ++off_codebook;
      }
    const auto src = encode_sentence(f.model, f.words[r.pairs[p].first]).indices;
    const auto tgt = encode_sentence(f.model, f.words[r.pairs[p].second]).indices;
    const std::size_t len = std::max(src.size(), tgt.size());
    if (steps.empty() || steps.front().indices != padded(src, len) || steps.back().indices != padded(tgt, len))
      ++bad_endpoints;
    if (r.values[p] > 1.0 + kIsSlack) ++over;
  }

  const auto same = run_interpolation(f.model, f.words, sample_pairs(f.words.size(), kInterpPairs, 108, true));
  std::size_t same_not_one = 0;
  for (double v : same.values)
    if (v != 1.0) ++same_not_one;

  // wmd against the permutation oracle: random bags, then equal-length bags
  // of short fixture sentences under the trained model.
  const auto oracle = vqtest::run_wmd_oracle(1000, 109);
  std::vector<EmbeddingBag> bags;
  for (const auto& w : f.words)
    if (w.size() + 1 <= 4) bags.push_back(sentence_bag(f.model, w));
  double model_err = 0.0;
  std::size_t model_pairs = 0;
  for (std::size_t a = 0; a < bags.size() && model_pairs < 500; ++a)
    for (std::size_t b = a + 1; b < bags.size() && model_pairs < 500; ++b)
      if (bags[a].size() == bags[b].size()) {
        model_err = std::max(model_err, std::abs(wmd(bags[a], bags[b]).cost - vqtest::permutation_wmd(bags[a], bags[b])));
        ++model_pairs;
      }

  const bool pass = r.paths.size() == kInterpPairs && off_codebook == 0 && bad_endpoints == 0 && over == 0 &&
                    same_not_one == 0 && oracle.max_abs_error < kWmdTol && model_pairs > 0 && model_err < kWmdTol;
  rep.criterion(7, "codebook interpolation", pass,
                {std::to_string(r.paths.size()) + " random pairs: rows off the codebook " + std::to_string(off_codebook) +
                     ", bad endpoints " + std::to_string(bad_endpoints) + ", IS > 1+1e-9: " + std::to_string(over),
                 "IS mean " + num(r.mean, 5) + ", min " + num(r.min, 5) + ", max " + num(r.max, 12),
                 "source == target: " + std::to_string(same.values.size() - same_not_one) + "/" +
                     std::to_string(same.values.size()) + " give exactly 1.0",
                 "wmd vs permutation oracle: random bags " + std::to_string(oracle.cases) + " max err " +
                     num(oracle.max_abs_error, 3) + ", fixture pairs " + std::to_string(model_pairs) + " max err " +
                     num(model_err, 3) + " (tol " + num(kWmdTol) + ")"});
}

void tree_control(Report& rep, const Fixture& f) {
  const auto oracle = vqtest::run_cart_oracle(kCartCases, 110, 200, 8, 3);
  const double sep = vqtest::separable_accuracy(111);
  const auto ex = run_tree_experiment(f.model, f.corpus, RegionSpec{}, kMoves, 7);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < ex.moves.size(); ++i)
    if (ex.moves[i].decoded.back() != ex.moved[i]) ++changed;
  const bool pass = oracle.mismatches == 0 && sep >= kSeparability && ex.consistency >= kConsistency;
  rep.criterion(8, "decision-tree region control", pass,
                {"CART oracle, " + std::to_string(oracle.cases) + " instances of 200 x 8-d, depth 3: mismatches " +
                     std::to_string(oracle.mismatches),
                 "separable synthetic regions: held-out accuracy " + num(sep, 4) + " (min " + num(kSeparability) + ")",
                 "causes -> means: tree held-out accuracy " + num(ex.heldout_metrics.accuracy, 4) + ", path length " +
                     std::to_string(ex.path.size()) + ", moved " + std::to_string(ex.moves.size()) +
                     " sentences, decoded output changed for " + std::to_string(changed) + ", consistency " +
                     num(ex.consistency, 4) + " (min " + num(kConsistency) + ")"});
}

void substitution(Report& rep, const Fixture& f) {
  const auto instances = substitution_instances(f.corpus, kInferInstances, 112);
  const auto inf = run_inference(f.model, instances);
  std::map<SubstitutionOp, std::pair<std::size_t, std::size_t>> per_op;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    ++per_op[instances[i].op].second;
    if (inf.exact[i]) ++per_op[instances[i].op].first;
  }

  const AnnotatedSentence* shark = nullptr;
  const AnnotatedSentence* fish = nullptr;
  for (const auto& s : f.corpus) {
    if (s.text() == "a shark is a kind of fish") shark = &s;
    if (s.text() == "a fish is a kind of aquatic animal") fish = &s;
  }
  std::string shark_out = "(premises missing from the corpus)";
  if (shark && fish)
    shark_out = join(substitute_and_decode(f.model, annotate(f.model, *shark), annotate(f.model, *fish),
                                           SubstitutionOp::arg_sub)
                         .decoded);
  const std::string shark_expected = "a shark is a kind of aquatic animal";

  std::vector<std::string> details{std::to_string(instances.size()) + " instances: exact match " +
                                   num(inf.exact_match, 4) + " (min " + num(kInferExact) + ")"};
  for (const auto& [op, c] : per_op)
    details.push_back(to_string(op) + ": " + std::to_string(c.first) + "/" + std::to_string(c.second));
  details.push_back("shark/fish arg_sub: \"" + shark_out + "\"");
  rep.criterion(9, "substitution inference",
                instances.size() == kInferInstances && inf.exact_match >= kInferExact && shark_out == shark_expected,
                details);
}

// Runs the command line pipeline into `dir` and returns every file it wrote.
std::map<std::string, std::string> cli_pipeline(const std::filesystem::path& dir) {
  const std::string out = " --out \"" + dir.string() + "\"";
  const std::string corpus = " --corpus \"" + (dir / "corpus.txt").string() + "\"";
  const std::vector<std::string> steps{
      "gen-corpus --count 150 --math-count 10 --premises 20" + out,
      "train --epochs 2 --seed 9" + out + corpus,
      "reconstruct" + out + corpus,
      "interpolate --random 10" + out + corpus,
      "tree --moves 10" + out + corpus,
      "infer --premises \"" + (dir / "premises.tsv").string() + "\"" + out,
  };
  for (const auto& s : steps)
    if (const int code = vqtest::run_cli(s); code != 0)
      throw Error("cli step '" + s.substr(0, s.find(' ')) + "' exited with " + std::to_string(code));
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::string bytes = read_file(e.path());
    // The output directory itself is recorded in the run config.
    if (e.path().filename() == "config.json") {
      auto j = nlohmann::json::parse(bytes);
      j.erase("out_dir");
      bytes = j.dump();
    }
    files[e.path().filename().string()] = std::move(bytes);
  }
  return files;
}

void persistence(Report& rep, const Fixture& f) {
  const auto dir = vqtest::fresh_dir("acceptance_ckpt");
  save_model(dir / "model.vql", f.model);
  const VqModel back = load_model(dir / "model.vql");
  const auto a = to_checkpoint(f.model), b = to_checkpoint(back);
  bool ckpt_ok = a.config == b.config && a.tensors.size() == b.tensors.size() &&
                 serialize_checkpoint(b) == read_file(dir / "model.vql");
  for (std::size_t i = 0; ckpt_ok && i < a.tensors.size(); ++i)
    ckpt_ok = a.tensors[i].first == b.tensors[i].first && same_bits(a.tensors[i].second, b.tensors[i].second);

  const auto ex = run_tree_experiment(f.model, f.corpus, RegionSpec{}, 0, 7);
  const std::string tree_text = to_json(ex.tree).dump();
  const auto tree_back = tree_from_json(nlohmann::json::parse(tree_text));
  const bool tree_ok = tree_back == ex.tree && to_json(tree_back).dump() == tree_text;

  const auto run1 = cli_pipeline(vqtest::fresh_dir("acceptance_run1"));
  const auto run2 = cli_pipeline(vqtest::fresh_dir("acceptance_run2"));
  std::size_t differing = 0;
  for (const auto& [name, bytes] : run1) {
    const auto it = run2.find(name);
    if (it == run2.end() || it->second != bytes) ++differing;
  }
  const bool e2e_ok = run1.size() == run2.size() && differing == 0 && run1.count("reconstruct_report.txt") &&
                      run1.count("is_report.txt") && run1.count("tree_report.txt") && run1.count("infer_report.txt");

  rep.criterion(10, "persistence and determinism", ckpt_ok && tree_ok && e2e_ok,
                {std::string("checkpoint save/load bit-exact: ") + (ckpt_ok ? "yes" : "no") + " (" +
                     std::to_string(a.tensors.size()) + " tensors)",
                 std::string("tree JSON round trip exact: ") + (tree_ok ? "yes" : "no") + " (" +
                     std::to_string(ex.tree.nodes.size()) + " nodes)",
                 "two same-seed CLI runs: " + std::to_string(run1.size()) + " files, " + std::to_string(differing) +
                     " differ"});
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = Clock::now();
  Report rep;
  try {
    gradients(rep);
    quantizer_oracle(rep);
    ema_convergence(rep);
    kl_constant(rep);
    gumbel(rep);
    const Fixture fixture = training(rep);
    interpolation(rep, fixture);
    tree_control(rep, fixture);
    substitution(rep, fixture);
    persistence(rep, fixture);
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 1;
  }
  const std::string tail = rep.summary() + "total " + num(seconds_since(t0), 4) + " s\n";
  std::cout << tail;
  if (argc > 1) write_file_atomic(argv[1], rep.text() + tail);
  return 0;
}
