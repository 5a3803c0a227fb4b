#pragma once

#include "vqlatent/experiments.hpp"

namespace vqtest {

/// Ten-sentence model trained to memorization, built once per process.
inline const vql::VqModel& memorized_model() {
  static const vql::VqModel model = [] {
    vql::VqModel m = vql::init_model(vql::grammar_vocabulary(), vql::ModelConfig{}, vql::QuantizerConfig{}, 3);
    vql::train(m, vql::words_of(vql::memorization_corpus()), vql::memorization_train_config());
    return m;
  }();
  return model;
}

}  // namespace vqtest
