#include "vqlatent/optim.hpp"

#include <cmath>

#include "vqlatent/errors.hpp"

namespace vql::ad {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (config_.lr <= 0 || config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1 ||
      config_.eps <= 0) {
    throw ContractError("adam: invalid hyperparameters");
  }
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  double clip = 1.0;
  if (config_.clip_norm > 0) {
    double sq = 0;
    for (const auto& p : params_)
      if (p.has_grad())
        for (T g : p.grad()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    auto data = p.data_mut();
    const auto grad = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = static_cast<double>(grad[i]) * clip;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] = static_cast<T>(static_cast<double>(data[i]) - config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace vql::ad
