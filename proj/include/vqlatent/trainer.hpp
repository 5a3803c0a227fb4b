#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqlatent/optim.hpp"
#include "vqlatent/vqmodel.hpp"

namespace vql {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  ad::AdamConfig adam{};
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig& o) const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  std::size_t epoch = 0;
  double ce = 0.0;         // mean reconstruction cross-entropy per sentence
  double commit = 0.0;     // mean ||E(x) - sg[z_q]||^2 per sentence
  double token_acc = 0.0;  // teacher-forced next-token accuracy
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains encoder, decoder and codebook on `sentences`. The first epoch is
/// preceded by a warmup pass whose encoder outputs seed the codebook. With
/// `epochs == 0` the model is left untouched.
std::vector<EpochStats> train(VqModel& model, const std::vector<std::vector<std::string>>& sentences,
                              const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Header "epoch,ce,commit,token_acc" followed by one row per epoch.
std::string format_loss_log(const std::vector<EpochStats>& stats);

struct SentenceReconstruction {
  std::vector<std::string> reference;
  std::vector<std::string> output;
  bool exact = false;
  double token_accuracy = 0.0;
};

struct ReconstructionReport {
  std::vector<SentenceReconstruction> sentences;
  double exact_match = 0.0;
  double token_accuracy = 0.0;  // pooled over all positions
  std::array<double, 4> bleu{};
};

/// Greedy reconstruction of each sentence. Token accuracy compares position
/// by position, including the end token, over the longer of reference and
/// output.
ReconstructionReport evaluate_reconstruction(const VqModel& model,
                                             const std::vector<std::vector<std::string>>& sentences);

}  // namespace vql
