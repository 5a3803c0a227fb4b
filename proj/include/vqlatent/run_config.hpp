#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "json.hpp"
#include "vqlatent/codebook.hpp"
#include "vqlatent/model.hpp"
#include "vqlatent/trainer.hpp"

namespace vql {

struct CorpusSpec {
  std::size_t count = 500;
  std::uint64_t seed = 5;
  bool operator==(const CorpusSpec&) const = default;
};

/// Everything a run of the command line tool depends on. The defaults
/// reproduce the 500-sentence training fixture.
struct RunConfig {
  std::uint64_t seed = 3;  // parameter initialisation
  ModelConfig model;
  QuantizerConfig quant;
  TrainConfig train;
  CorpusSpec corpus;
  std::string out_dir = "run";

  RunConfig();
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are an InputError.
RunConfig run_config_from_json(const nlohmann::json& j);

using EnvLookup = std::function<const char*(const char*)>;

/// Applies VQL_SEED, VQL_TRAIN_SEED, VQL_EPOCHS, VQL_BATCH_SIZE, VQL_LR,
/// VQL_CODEBOOK_SIZE, VQL_CORPUS_COUNT, VQL_CORPUS_SEED and VQL_OUT_DIR.
void apply_env(RunConfig& config, const EnvLookup& lookup);

}  // namespace vql
