// vqlatent: corpus generation, training and latent-space experiments.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vqlatent/errors.hpp"
#include "vqlatent/experiments.hpp"
#include "vqlatent/fileio.hpp"
#include "vqlatent/run_config.hpp"

namespace fs = std::filesystem;
using namespace vql;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitContract = 3;
constexpr int kExitIo = 4;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

// Options shared by every subcommand. Unset optionals leave the config value
// (file, then environment) alone.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string checkpoint;
  std::string corpus;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config");
  cmd->add_option("--seed", c.seed, "parameter initialisation seed");
  cmd->add_option("--out", c.out_dir, "output directory");
}

RunConfig load_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(c.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("config " + c.config_path + ": " + e.what());
    }
    cfg = run_config_from_json(j);
  }
  apply_env(cfg, [](const char* name) { return std::getenv(name); });
  if (c.seed) cfg.seed = *c.seed;
  if (c.out_dir) cfg.out_dir = *c.out_dir;
  cfg.validate();
  return cfg;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) { return fs::path(cfg.out_dir) / name; }

std::string checkpoint_path(const Common& c, const RunConfig& cfg) {
  return c.checkpoint.empty() ? out_path(cfg, "model.vql").string() : c.checkpoint;
}

std::vector<AnnotatedSentence> load_corpus(const Common& c, const RunConfig& cfg) {
  if (c.corpus.empty()) return fixture_corpus(cfg.corpus.seed, cfg.corpus.count);
  auto corpus = parse_corpus(read_file(c.corpus));
  if (corpus.empty()) throw InputError("corpus " + c.corpus + " is empty");
  return corpus;
}

// Writes `text` atomically under the run directory and echoes it.
void emit(const RunConfig& cfg, const std::string& name, const std::string& text, bool echo = true) {
  write_file_atomic(out_path(cfg, name), text);
  if (echo) std::cout << text;
}

std::vector<std::string> sentence_words(const std::string& text, const VqModel& model) {
  auto words = split_words(text);
  if (words.empty()) throw InputError("empty sentence");
  for (const auto& w : words)
    if (!model.vocab.find(w)) throw InputError("word '" + w + "' is not in the model vocabulary");
  return words;
}

// ---- subcommands ----------------------------------------------------------------

struct GenCorpusArgs {
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> corpus_seed;
  std::size_t math_count = 100;
  std::size_t premises = 100;
};

void cmd_gen_corpus(const Common& c, const GenCorpusArgs& a) {
  RunConfig cfg = load_config(c);
  if (a.count) cfg.corpus.count = *a.count;
  if (a.corpus_seed) cfg.corpus.seed = *a.corpus_seed;
  cfg.validate();
  const auto corpus = fixture_corpus(cfg.corpus.seed, cfg.corpus.count);
  emit(cfg, "corpus.txt", format_corpus(corpus), false);
  emit(cfg, "vocab.txt", format_vocabulary(grammar_vocabulary()), false);

  std::vector<MathExpression> math;
  for (MathSplit split : {MathSplit::EVAL, MathSplit::VAR, MathSplit::EASY, MathSplit::EQ, MathSplit::LEN}) {
    auto part = generate_math(cfg.corpus.seed, a.math_count, split);
    math.insert(math.end(), part.begin(), part.end());
  }
  emit(cfg, "math.txt", format_math_corpus(math), false);

  std::string premises;
  for (const auto& inst : substitution_instances(corpus, a.premises, cfg.corpus.seed))
    premises += inst.p1.text() + "\t" + inst.p2.text() + "\t" + to_string(inst.op) + "\n";
  emit(cfg, "premises.tsv", premises, false);
  std::cout << "corpus " << corpus.size() << " sentences, math " << math.size() << " expressions -> " << cfg.out_dir
            << "\n";
}

struct TrainArgs {
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
};

void cmd_train(const Common& c, const TrainArgs& a) {
  RunConfig cfg = load_config(c);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.lr) cfg.train.adam.lr = *a.lr;
  cfg.validate();
  const auto corpus = load_corpus(c, cfg);
  const Vocabulary vocab = grammar_vocabulary();
  for (const auto& s : corpus)
    for (const auto& w : s.tokens)
      if (!vocab.find(w)) throw InputError("corpus word '" + w + "' is outside the grammar vocabulary");

  VqModel model = init_model(vocab, cfg.model, cfg.quant, cfg.seed);
  const auto log = train(model, words_of(corpus), cfg.train, [&](const EpochStats& s) {
    std::cerr << "epoch " << s.epoch << " ce " << fmt(s.ce) << " token_acc " << fmt(s.token_acc) << "\n";
  });
  save_model(out_path(cfg, "model.vql"), model);
  emit(cfg, "loss.csv", format_loss_log(log), false);
  emit(cfg, "config.json", to_json(cfg).dump(2) + "\n", false);
  std::cout << "trained " << log.size() << " epochs on " << corpus.size() << " sentences -> "
            << out_path(cfg, "model.vql").string() << "\n";
}

void cmd_reconstruct(const Common& c) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  const auto report = evaluate_reconstruction(model, words_of(load_corpus(c, cfg)));
  std::string rows = "reference\toutput\texact\ttoken_acc\n";
  for (const auto& s : report.sentences)
    rows += join(s.reference) + "\t" + join(s.output) + "\t" + (s.exact ? "1" : "0") + "\t" + fmt(s.token_accuracy) + "\n";
  emit(cfg, "reconstruct.tsv", rows, false);
  std::string summary = "sentences " + std::to_string(report.sentences.size()) + "\n";
  summary += "exact_match " + fmt(report.exact_match) + "\n";
  summary += "token_accuracy " + fmt(report.token_accuracy) + "\n";
  for (std::size_t n = 0; n < 4; ++n) summary += "bleu" + std::to_string(n + 1) + " " + fmt(report.bleu[n]) + "\n";
  emit(cfg, "reconstruct_report.txt", summary);
}

struct InterpolateArgs {
  std::string source, target;
  std::size_t random = 100;
  bool same = false;
  double step = 0.1;
  std::uint64_t pair_seed = 9;
};

void cmd_interpolate(const Common& c, const InterpolateArgs& a) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (!a.source.empty() || !a.target.empty()) {
    if (a.source.empty() || a.target.empty()) throw InputError("--source and --target go together");
    sentences = {sentence_words(a.source, model), sentence_words(a.target, model)};
    pairs = {a.same ? std::pair<std::size_t, std::size_t>{0, 0} : std::pair<std::size_t, std::size_t>{0, 1}};
  } else {
    sentences = words_of(load_corpus(c, cfg));
    pairs = sample_pairs(sentences.size(), a.random, a.pair_seed, a.same);
  }
  const SmoothnessReport r = run_interpolation(model, sentences, pairs, a.step);
  std::string dump;
  for (std::size_t p = 0; p < r.paths.size(); ++p) {
    dump += "# " + join(sentences[r.pairs[p].first]) + " -> " + join(sentences[r.pairs[p].second]) +
            "  IS " + fmt(r.values[p]) + "\n" + format_path(r.paths[p]);
  }
  emit(cfg, "paths.txt", dump, false);
  std::string summary = "pairs " + std::to_string(r.values.size()) + "\n";
  summary += "avg_is " + fmt(r.mean) + "\nmax_is " + fmt(r.max) + "\nmin_is " + fmt(r.min) + "\n";
  emit(cfg, "is_report.txt", summary);
}

struct TraverseArgs {
  std::string sentence;
  std::size_t position = 0;
  std::size_t n = 10;
};

void cmd_traverse(const Common& c, const TraverseArgs& a) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  const auto latents = encode_sentence(model, sentence_words(a.sentence, model));
  std::string out;
  for (const auto& v : traverse_position(model, latents.indices, a.position, a.n))
    out += std::to_string(v.entry) + "\t" + join(v.decoded) + "\n";
  emit(cfg, "traverse.txt", out);
}

struct ArithArgs {
  std::string a, b;
};

void cmd_arith(const Common& c, const ArithArgs& a) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  const auto la = encode_sentence(model, sentence_words(a.a, model));
  const auto lb = encode_sentence(model, sentence_words(a.b, model));
  emit(cfg, "arith.txt", join(latent_arithmetic_add(model, la.quantized, lb.quantized)) + "\n");
}

void cmd_disentangle(const Common& c) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  std::vector<AnnotatedLatents> annotated;
  for (const auto& s : load_corpus(c, cfg)) annotated.push_back(annotate(model, s));
  std::string out = "role_content\toccurrences\tnum_centers\tavg_dis\tmax_dis\tmin_dis\n";
  for (const auto& s : disentanglement_stats(annotated, model.codebook)) {
    out += s.label + "\t" + std::to_string(s.occurrences) + "\t" + std::to_string(s.num_centers) + "\t" +
           fmt(s.avg_dis) + "\t" + fmt(s.max_dis) + "\t" + fmt(s.min_dis) + "\n";
  }
  emit(cfg, "disentangle.tsv", out);
}

struct TreeArgs {
  std::string region = "predicate";
  std::size_t moves = 100;
  std::size_t max_depth = 6;
  std::size_t min_leaf = 5;
  std::uint64_t move_seed = 7;
  std::size_t show = 5;
};

void cmd_tree(const Common& c, const TreeArgs& a) {
  const RunConfig cfg = load_config(c);
  const RegionSpec spec = region_spec_from_string(a.region);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  const TreeExperiment ex =
      run_tree_experiment(model, load_corpus(c, cfg), spec, a.moves, a.move_seed, a.max_depth, a.min_leaf);
  emit(cfg, "tree.json", to_json(ex.tree).dump(2) + "\n", false);

  std::string moves;
  for (const auto& m : ex.moves) {
    for (std::size_t k = 0; k < m.decoded.size(); ++k) moves += (k ? " => " : "") + join(m.decoded[k]);
    moves += "\n";
  }
  emit(cfg, "moves.txt", moves, false);

  auto metrics = [](const std::string& name, const TreeMetrics& m) {
    return name + " separability " + fmt(m.accuracy) + " precision " + fmt(m.precision) + " recall " +
           fmt(m.recall) + " f1 " + fmt(m.f1) + "\n";
  };
  std::string report = "region " + to_string(spec.kind) + " " + spec.source + " -> " + spec.target + "\n";
  report += "depth " + std::to_string(ex.tree.depth()) + " nodes " + std::to_string(ex.tree.nodes.size()) + "\n";
  report += metrics("train", ex.train_metrics) + metrics("heldout", ex.heldout_metrics);
  report += "path\n" + format_path(ex.path);
  report += "moved " + std::to_string(ex.moved.size()) + "\n";
  report += "consistency " + fmt(ex.consistency) + "\n";
  for (std::size_t i = 0; i < std::min(a.show, ex.moves.size()); ++i) {
    report += "example " + join(ex.moves[i].decoded.front()) + " => " + join(ex.moves[i].decoded.back()) + "\n";
  }
  emit(cfg, "tree_report.txt", report);
}

struct InferArgs {
  std::string premises;
  std::string op;
};

void cmd_infer(const Common& c, const InferArgs& a) {
  const RunConfig cfg = load_config(c);
  const VqModel model = load_model(checkpoint_path(c, cfg));
  std::optional<SubstitutionOp> forced;
  if (!a.op.empty()) forced = substitution_op_from_string(a.op);

  auto parse_premise = [](const std::string& text, std::size_t line) {
    auto parsed = parse_sentence(split_words(text));
    if (!parsed) throw InputError("premises line " + std::to_string(line) + ": '" + text + "' is not a grammar sentence");
    return *parsed;
  };
  std::vector<SubstitutionInstance> instances;
  std::istringstream in(read_file(a.premises));
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    for (std::string f; std::getline(fields, f, '\t');) cols.push_back(f);
    if (cols.size() < 2 || cols.size() > 3) throw InputError("premises line " + std::to_string(n) + ": expected 2 or 3 tab-separated columns");
    SubstitutionInstance inst;
    inst.p1 = parse_premise(cols[0], n);
    inst.p2 = parse_premise(cols[1], n);
    if (forced) {
      inst.op = *forced;
    } else if (cols.size() == 3) {
      inst.op = substitution_op_from_string(cols[2]);
    } else {
      throw InputError("premises line " + std::to_string(n) + ": no operation column and no --op");
    }
    const auto expected = grammar_conclusion(inst.p1, inst.p2, inst.op);
    if (!expected) throw InputError("premises line " + std::to_string(n) + ": the grammar licenses no conclusion");
    inst.expected = *expected;
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) throw InputError("premises file " + a.premises + " has no instances");

  const InferenceReport r = run_inference(model, instances);
  std::string rows = "p1\tp2\top\texpected\toutput\texact\n";
  for (std::size_t i = 0; i < instances.size(); ++i) {
    rows += instances[i].p1.text() + "\t" + instances[i].p2.text() + "\t" + to_string(instances[i].op) + "\t" +
            join(instances[i].expected) + "\t" + join(r.outputs[i]) + "\t" + (r.exact[i] ? "1" : "0") + "\n";
  }
  emit(cfg, "conclusions.tsv", rows, false);
  emit(cfg, "infer_report.txt",
       "instances " + std::to_string(instances.size()) + "\nexact_match " + fmt(r.exact_match) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-level VQ autoencoder and latent-space experiments"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-corpus", "write the grammar corpus, vocabulary, math splits and premises");
  add_common(gen, common);
  GenCorpusArgs gen_args;
  gen->add_option("--count", gen_args.count, "number of sentences");
  gen->add_option("--corpus-seed", gen_args.corpus_seed, "generator seed");
  gen->add_option("--math-count", gen_args.math_count, "expressions per math split");
  gen->add_option("--premises", gen_args.premises, "substitution premise pairs");

  auto* tr = app.add_subcommand("train", "train a model; writes model.vql and loss.csv");
  add_common(tr, common);
  TrainArgs train_args;
  tr->add_option("--corpus", common.corpus, "annotated corpus file (default: generated)");
  tr->add_option("--epochs", train_args.epochs);
  tr->add_option("--batch-size", train_args.batch_size);
  tr->add_option("--lr", train_args.lr);

  auto* rec = app.add_subcommand("reconstruct", "reconstruction accuracy and BLEU");
  add_common(rec, common);
  rec->add_option("--checkpoint", common.checkpoint);
  rec->add_option("--corpus", common.corpus);

  auto* interp = app.add_subcommand("interpolate", "codebook interpolation paths and smoothness");
  add_common(interp, common);
  InterpolateArgs interp_args;
  interp->add_option("--checkpoint", common.checkpoint);
  interp->add_option("--corpus", common.corpus);
  interp->add_option("--source", interp_args.source, "source sentence");
  interp->add_option("--target", interp_args.target, "target sentence");
  interp->add_option("--random", interp_args.random, "number of random corpus pairs");
  interp->add_flag("--same", interp_args.same, "pair every sentence with itself");
  interp->add_option("--step", interp_args.step)->check(CLI::Range(1e-6, 1.0));
  interp->add_option("--pair-seed", interp_args.pair_seed);

  auto* trav = app.add_subcommand("traverse", "vary the code at one position");
  add_common(trav, common);
  TraverseArgs trav_args;
  trav->add_option("--checkpoint", common.checkpoint);
  trav->add_option("--sentence", trav_args.sentence)->required();
  trav->add_option("--position", trav_args.position);
  trav->add_option("-n,--variants", trav_args.n);

  auto* ar = app.add_subcommand("arith", "decode the re-quantized sum of two sentences");
  add_common(ar, common);
  ArithArgs arith_args;
  ar->add_option("--checkpoint", common.checkpoint);
  ar->add_option("-a", arith_args.a)->required();
  ar->add_option("-b", arith_args.b)->required();

  auto* dis = app.add_subcommand("disentangle", "role-content code statistics");
  add_common(dis, common);
  dis->add_option("--checkpoint", common.checkpoint);
  dis->add_option("--corpus", common.corpus);

  auto* tree = app.add_subcommand("tree", "decision tree over pooled latents and guided moves");
  add_common(tree, common);
  TreeArgs tree_args;
  tree->add_option("--checkpoint", common.checkpoint);
  tree->add_option("--corpus", common.corpus);
  tree->add_option("--region", tree_args.region, "topic, predicate or argument");
  tree->add_option("--moves", tree_args.moves);
  tree->add_option("--max-depth", tree_args.max_depth);
  tree->add_option("--min-leaf", tree_args.min_leaf);
  tree->add_option("--move-seed", tree_args.move_seed);
  tree->add_option("--show", tree_args.show, "example moves to print");

  auto* inf = app.add_subcommand("infer", "substitution inference against the grammar oracle");
  add_common(inf, common);
  InferArgs infer_args;
  inf->add_option("--checkpoint", common.checkpoint);
  inf->add_option("--premises", infer_args.premises, "tab-separated premise pairs")->required();
  inf->add_option("--op", infer_args.op, "arg_sub, verb_sub, further_spec or conjunction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) cmd_gen_corpus(common, gen_args);
    else if (*tr) cmd_train(common, train_args);
    else if (*rec) cmd_reconstruct(common);
    else if (*interp) cmd_interpolate(common, interp_args);
    else if (*trav) cmd_traverse(common, trav_args);
    else if (*ar) cmd_arith(common, arith_args);
    else if (*dis) cmd_disentangle(common);
    else if (*tree) cmd_tree(common, tree_args);
    else if (*inf) cmd_infer(common, infer_args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return 0;
}
