#pragma once

#include <vector>

#include "vqlatent/tensor.hpp"

namespace vql::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; non-positive disables clipping.
  double clip_norm = 0.0;
};

/// Adam with bias correction. Holds its parameter handles; moments are kept
/// in 64-bit regardless of the parameter type.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Parameters without a
  /// gradient are skipped.
  void step();
  void zero_grad();

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig config_;
  long t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace vql::ad
