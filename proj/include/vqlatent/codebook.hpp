#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqlatent/tensor.hpp"

namespace vql {

using ad::Tensor;

enum class QuantScheme { kmeans, gumbel };

std::string to_string(QuantScheme scheme);
QuantScheme quant_scheme_from_string(const std::string& s);

struct QuantizerConfig {
  QuantScheme scheme = QuantScheme::kmeans;
  double beta = 0.25;  // commitment weight, must stay below 1
  double tau = 1.0;    // Gumbel temperature
  bool ema = true;
  /// Keep the codebook term ||sg[E(x)] - z_q||^2 in the loss even when EMA
  /// updates the entries.
  bool codebook_loss_with_ema = false;
  double decay = 0.99;
  std::size_t codebook_size = 512;

  void validate() const;
  bool operator==(const QuantizerConfig&) const = default;
};

nlohmann::json to_json(const QuantizerConfig& config);
QuantizerConfig quantizer_config_from_json(const nlohmann::json& j);

/// Entries below this EMA count are considered dead and get reseeded.
inline constexpr float kDeadCountThreshold = 1e-3f;

/// The discrete latent table z in R^{K x I} with its EMA accumulators
/// (counts N and running sums m). After any EMA step every live entry
/// satisfies z_k == m_k / N_k.
class Codebook {
 public:
  Codebook(std::size_t size, std::size_t width, double decay = 0.99);

  /// Entries taken from `entries` [K x I]; counts start at 1 and sums equal
  /// the entries.
  static Codebook from_entries(const Tensor<float>& entries, double decay = 0.99);
  /// Restores a persisted state (z, N, m).
  static Codebook from_state(const Tensor<float>& z, const Tensor<float>& counts, const Tensor<float>& sums,
                             double decay);

  std::size_t size() const { return size_; }
  std::size_t width() const { return width_; }
  double decay() const { return decay_; }

  std::span<const float> entry(std::size_t k) const;
  std::span<const float> entries() const { return z_; }
  std::span<const float> counts() const { return counts_; }
  std::span<const float> sums() const { return sums_; }

  /// Mutable access for gradient-trained (non-EMA) codebooks.
  std::span<float> entries_mut() { return z_; }

  /// Gathers rows as a [n x I] tensor without gradient.
  Tensor<float> rows(std::span<const std::size_t> indices) const;
  template <typename T>
  Tensor<T> rows_as(std::span<const std::size_t> indices) const;

  Tensor<float> entries_tensor() const;
  Tensor<float> counts_tensor() const;
  Tensor<float> sums_tensor() const;

 private:
  friend std::vector<std::size_t> ema_update(Codebook&, std::span<const float>, std::span<const std::size_t>,
                                             std::mt19937_64*);
  friend void seed_codebook(Codebook&, std::span<const float>, std::mt19937_64&);

  std::size_t size_;
  std::size_t width_;
  double decay_;
  std::vector<float> z_;
  std::vector<float> counts_;
  std::vector<float> sums_;
};

/// Squared Euclidean distance accumulated in double precision.
template <typename T>
double squared_distance(std::span<const T> a, std::span<const float> b);

/// Index of the nearest entry; ties resolve to the lowest index.
template <typename T>
std::size_t nearest_entry(std::span<const T> x, const Codebook& codebook);

template <typename T>
struct Quantized {
  std::vector<std::size_t> indices;
  Tensor<T> values;  // [L x I], rows copied from the codebook
};

/// Nearest-neighbour quantization of each row of `embeddings` [L x I].
template <typename T>
Quantized<T> quantize_kmeans(const Tensor<T>& embeddings, const Codebook& codebook);

struct GumbelSelection {
  std::vector<std::size_t> indices;
  Tensor<double> probabilities;  // softmax((log t + g) / tau), [L x K]
  Tensor<float> values;          // selected codebook rows, [L x I]
};

/// Gumbel-max selection with caller-supplied noise `noise` [L x K]. The index
/// is the argmax of log t + g, which is the argmax of the tempered softmax
/// for every tau > 0.
GumbelSelection quantize_gumbel(const Tensor<double>& t, const Tensor<double>& noise, const Codebook& codebook,
                                double tau);
/// Same, drawing standard Gumbel noise from `rng`.
GumbelSelection quantize_gumbel(const Tensor<double>& t, const Codebook& codebook, double tau, std::mt19937_64& rng);

/// Standard Gumbel(0, 1) samples.
std::vector<double> sample_gumbel(std::size_t n, std::mt19937_64& rng);

/// CE + ||sg[E(x)] - z_q||^2 + beta ||E(x) - sg[z_q]||^2 with squared
/// Frobenius norms. The codebook term is dropped when `codebook_term` is
/// false (EMA mode), both from the value and from the gradient.
template <typename T>
Tensor<T> vq_loss(const Tensor<T>& encoder_out, const Tensor<T>& quantized, const Tensor<T>& reconstruction_ce,
                  double beta, bool codebook_term);

/// One EMA step over a batch of embeddings [n x I] and their assigned
/// indices. Returns the entries whose count fell below the dead threshold;
/// when `rng` is given they are reseeded from random batch rows.
std::vector<std::size_t> ema_update(Codebook& codebook, std::span<const float> embeddings,
                                    std::span<const std::size_t> indices, std::mt19937_64* rng);

/// D^2-weighted seeding of every entry from sample rows [n x I]. When the
/// samples run out of distinct points the remaining entries are jittered
/// copies of random samples.
void seed_codebook(Codebook& codebook, std::span<const float> samples, std::mt19937_64& rng);

/// KL(q || p) for a one-hot posterior against the uniform prior 1/K: log K.
double uniform_prior_kl(std::size_t codebook_size);

}  // namespace vql
