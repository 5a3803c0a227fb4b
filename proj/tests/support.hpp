#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "vqlatent/tensor.hpp"

namespace vqtest {

using vql::ad::Shape;
using vql::ad::Tensor;

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(vql::ad::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor<double>(shape, std::move(v), requires_grad);
}

inline std::size_t rand_dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Denominator floor of the relative error. Central differences at h = 1e-5
// carry roundoff near eps * |f| / h ~ 1e-10 for the losses used here, so
// gradients smaller than this are held to an absolute 1e-9 instead.
inline constexpr double kGradFloor = 1e-5;

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;                             // coordinates whose stencil straddles a kink
  double worst_analytic = 0.0, worst_numeric = 0.0;  // pair behind max_rel
};

inline constexpr double kGradTolerance = 1e-4;

/// Central differences of the scalar `f()` with respect to every element of
/// `inputs` (at most `max_coords` random elements per input), compared with
/// the tape gradient. `f` must rebuild its graph from the inputs each call.
/// When `numeric` is given the differences are taken of it instead; it must
/// agree with `f` in value and spell out what the gradient of `f` means
/// (stop-gradient and straight-through paths replaced by constants).
///
/// A coordinate that misses the tolerance is counted as a kink (a ReLU
/// switching inside [x - h, x + h]) instead of an error only when the tape
/// gradients at x - h and x + h themselves differ by more than the tolerance
/// and the difference quotient lies between them, which a wrong gradient on a
/// smooth stretch cannot do.
inline GradCheck grad_check(const std::vector<Tensor<double>>& inputs, const std::function<Tensor<double>()>& f,
                            std::size_t max_coords = 48, std::uint64_t seed = 0,
                            const std::function<Tensor<double>()>& numeric = {}, double h = 1e-5) {
  const auto& g = numeric ? numeric : f;
  auto tape_gradient = [&](std::size_t k, std::size_t i) {
    for (const auto& x : inputs) {
      Tensor<double> t = x;
      t.zero_grad();
    }
    f().backward();
    return inputs[k].has_grad() ? inputs[k].grad()[i] : 0.0;
  };
  auto value = [&] {
    vql::ad::NoGradGuard guard;
    return g().item();
  };

  std::vector<std::vector<double>> analytic;
  for (const auto& x : inputs) {
    Tensor<double> t = x;
    t.zero_grad();
  }
  f().backward();
  for (const auto& x : inputs) {
    if (x.has_grad()) {
      analytic.emplace_back(x.grad().begin(), x.grad().end());
    } else {
      analytic.emplace_back(x.numel(), 0.0);
    }
  }

  std::mt19937_64 rng(seed);
  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double> x = inputs[k];
    std::vector<std::size_t> coords(x.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t i : coords) {
      const double a = analytic[k][i];
      const double orig = x.data()[i];
      x.data_mut()[i] = orig + h;
      const double fp = value();
      x.data_mut()[i] = orig - h;
      const double fm = value();
      x.data_mut()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(a), std::abs(fd), kGradFloor});
      const double rel = std::abs(a - fd) / denom;
      ++out.checked;
      if (rel >= kGradTolerance) {
        x.data_mut()[i] = orig + h;
        const double a_hi = tape_gradient(k, i);
        x.data_mut()[i] = orig - h;
        const double a_lo = tape_gradient(k, i);
        x.data_mut()[i] = orig;
        const double slack = kGradTolerance * denom;
        const bool jumps = std::abs(a_hi - a_lo) > slack;
        const bool between = fd >= std::min(a_lo, a_hi) - slack && fd <= std::max(a_lo, a_hi) + slack;
        if (jumps && between) {
          ++out.kinks;
          continue;
        }
      }
      if (rel > out.max_rel) out.max_rel = rel, out.worst_analytic = a, out.worst_numeric = fd;
    }
  }
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vqlatent_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

#ifdef VQL_CLI_PATH
/// Runs the command line tool with `args` and returns its exit status.
inline int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + VQL_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}
#endif

}  // namespace vqtest
