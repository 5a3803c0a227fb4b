#include "vqlatent/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqlatent/errors.hpp"
#include "vqlatent/ops.hpp"

namespace vql {

std::string to_string(QuantScheme scheme) {
  return scheme == QuantScheme::kmeans ? "kmeans" : "gumbel";
}

QuantScheme quant_scheme_from_string(const std::string& s) {
  if (s == "kmeans") return QuantScheme::kmeans;
  if (s == "gumbel") return QuantScheme::gumbel;
  throw InputError("unknown quantization scheme '" + s + "'");
}

void QuantizerConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw ContractError("quantizer: commitment beta must lie in [0, 1)");
  if (!(tau > 0.0)) throw ContractError("quantizer: gumbel temperature must be positive");
  if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("quantizer: EMA decay must lie in [0, 1)");
  if (codebook_size == 0) throw ContractError("quantizer: codebook size must be positive");
}

nlohmann::json to_json(const QuantizerConfig& c) {
  return nlohmann::json{{"scheme", to_string(c.scheme)},
                        {"beta", c.beta},
                        {"tau", c.tau},
                        {"ema", c.ema},
                        {"codebook_loss_with_ema", c.codebook_loss_with_ema},
                        {"decay", c.decay},
                        {"codebook_size", c.codebook_size}};
}

QuantizerConfig quantizer_config_from_json(const nlohmann::json& j) {
  QuantizerConfig c;
  c.scheme = quant_scheme_from_string(j.value("scheme", to_string(c.scheme)));
  c.beta = j.value("beta", c.beta);
  c.tau = j.value("tau", c.tau);
  c.ema = j.value("ema", c.ema);
  c.codebook_loss_with_ema = j.value("codebook_loss_with_ema", c.codebook_loss_with_ema);
  c.decay = j.value("decay", c.decay);
  c.codebook_size = j.value("codebook_size", c.codebook_size);
  return c;
}

Codebook::Codebook(std::size_t size, std::size_t width, double decay)
    : size_(size), width_(width), decay_(decay), z_(size * width, 0.0f), counts_(size, 1.0f), sums_(size * width) {
  if (size == 0 || width == 0) throw ContractError("codebook: size and width must be positive");
  if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("codebook: decay must lie in [0, 1)");
}

Codebook Codebook::from_entries(const Tensor<float>& entries, double decay) {
  if (entries.rank() != 2) throw ShapeError("codebook: entries must be [K x I], got " + ad::shape_str(entries.shape()));
  Codebook cb(entries.dim(0), entries.dim(1), decay);
  cb.z_.assign(entries.data().begin(), entries.data().end());
  cb.sums_ = cb.z_;
  return cb;
}

Codebook Codebook::from_state(const Tensor<float>& z, const Tensor<float>& counts, const Tensor<float>& sums,
                              double decay) {
  Codebook cb = from_entries(z, decay);
  if (counts.numel() != cb.size_ || sums.shape() != z.shape()) {
    throw ShapeError("codebook: accumulator shapes " + ad::shape_str(counts.shape()) + ", " +
                     ad::shape_str(sums.shape()) + " do not match entries " + ad::shape_str(z.shape()));
  }
  cb.counts_.assign(counts.data().begin(), counts.data().end());
  cb.sums_.assign(sums.data().begin(), sums.data().end());
  return cb;
}

std::span<const float> Codebook::entry(std::size_t k) const {
  if (k >= size_) throw ContractError("codebook: entry " + std::to_string(k) + " out of range");
  return std::span<const float>(z_).subspan(k * width_, width_);
}

Tensor<float> Codebook::rows(std::span<const std::size_t> indices) const {
  return rows_as<float>(indices);
}

template <typename T>
Tensor<T> Codebook::rows_as(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("codebook: no indices to gather");
  std::vector<T> out(indices.size() * width_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto e = entry(indices[i]);
    std::copy(e.begin(), e.end(), out.begin() + static_cast<std::ptrdiff_t>(i * width_));
  }
  return Tensor<T>({indices.size(), width_}, std::move(out));
}

template Tensor<float> Codebook::rows_as<float>(std::span<const std::size_t>) const;
template Tensor<double> Codebook::rows_as<double>(std::span<const std::size_t>) const;

Tensor<float> Codebook::entries_tensor() const {
  return Tensor<float>({size_, width_}, z_);
}
Tensor<float> Codebook::counts_tensor() const {
  return Tensor<float>({size_}, counts_);
}
Tensor<float> Codebook::sums_tensor() const {
  return Tensor<float>({size_, width_}, sums_);
}

template <typename T>
double squared_distance(std::span<const T> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    acc += diff * diff;
  }
  return acc;
}

template double squared_distance<float>(std::span<const float>, std::span<const float>);
template double squared_distance<double>(std::span<const double>, std::span<const float>);

template <typename T>
std::size_t nearest_entry(std::span<const T> x, const Codebook& codebook) {
  if (x.size() != codebook.width()) {
    throw ShapeError("quantize: embedding width " + std::to_string(x.size()) + " differs from codebook width " +
                     std::to_string(codebook.width()));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const double d = squared_distance<T>(x, codebook.entry(k));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

template std::size_t nearest_entry<float>(std::span<const float>, const Codebook&);
template std::size_t nearest_entry<double>(std::span<const double>, const Codebook&);

template <typename T>
Quantized<T> quantize_kmeans(const Tensor<T>& embeddings, const Codebook& codebook) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != codebook.width()) {
    throw ShapeError("quantize: embeddings " + ad::shape_str(embeddings.shape()) + " do not have width " +
                     std::to_string(codebook.width()));
  }
  const std::size_t L = embeddings.dim(0), I = codebook.width();
  Quantized<T> q;
  q.indices.resize(L);
  for (std::size_t i = 0; i < L; ++i) q.indices[i] = nearest_entry<T>(embeddings.data().subspan(i * I, I), codebook);
  q.values = codebook.rows_as<T>(q.indices);
  return q;
}

template Quantized<float> quantize_kmeans<float>(const Tensor<float>&, const Codebook&);
template Quantized<double> quantize_kmeans<double>(const Tensor<double>&, const Codebook&);

std::vector<double> sample_gumbel(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> g(n);
  for (double& v : g) {
    double u = 0.0;
    while (u <= 0.0) u = unif(rng);
    v = -std::log(-std::log(u));
  }
  return g;
}

GumbelSelection quantize_gumbel(const Tensor<double>& t, const Tensor<double>& noise, const Codebook& codebook,
                                double tau) {
  if (!(tau > 0.0)) throw ContractError("quantize_gumbel: temperature must be positive");
  if (t.rank() != 2 || t.dim(1) != codebook.size()) {
    throw ShapeError("quantize_gumbel: probabilities " + ad::shape_str(t.shape()) + " do not have K=" +
                     std::to_string(codebook.size()) + " columns");
  }
  if (noise.shape() != t.shape()) {
    throw ShapeError("quantize_gumbel: noise " + ad::shape_str(noise.shape()) + " vs " + ad::shape_str(t.shape()));
  }
  const std::size_t L = t.dim(0), K = t.dim(1);
  GumbelSelection out;
  out.indices.resize(L);
  std::vector<double> probs(L * K);
  const auto tv = t.data();
  const auto gv = noise.data();
  std::vector<double> perturbed(K);
  for (std::size_t i = 0; i < L; ++i) {
    bool any_positive = false;
    for (std::size_t k = 0; k < K; ++k) {
      const double tk = tv[i * K + k];
      if (!(tk >= 0.0) || !std::isfinite(tk)) throw ContractError("quantize_gumbel: probabilities must be finite and >= 0");
      any_positive = any_positive || tk > 0.0;
      perturbed[k] = std::log(tk) + gv[i * K + k];
    }
    if (!any_positive) throw ContractError("quantize_gumbel: row " + std::to_string(i) + " has no positive mass");
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (perturbed[k] > perturbed[best]) best = k;
    out.indices[i] = best;
    const double mx = perturbed[best];
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double e = std::exp((perturbed[k] - mx) / tau);
      probs[i * K + k] = e;
      z += e;
    }
    for (std::size_t k = 0; k < K; ++k) probs[i * K + k] /= z;
  }
  out.probabilities = Tensor<double>({L, K}, std::move(probs));
  out.values = codebook.rows(out.indices);
  return out;
}

GumbelSelection quantize_gumbel(const Tensor<double>& t, const Codebook& codebook, double tau, std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw ContractError("quantize_gumbel: temperature must be positive");
  Tensor<double> noise(t.shape(), sample_gumbel(t.numel(), rng));
  return quantize_gumbel(t, noise, codebook, tau);
}

template <typename T>
Tensor<T> vq_loss(const Tensor<T>& encoder_out, const Tensor<T>& quantized, const Tensor<T>& reconstruction_ce,
                  double beta, bool codebook_term) {
  using namespace ad;
  if (encoder_out.shape() != quantized.shape()) {
    throw ShapeError("vq_loss: encoder output " + shape_str(encoder_out.shape()) + " vs quantized " +
                     shape_str(quantized.shape()));
  }
  Tensor<T> loss = reconstruction_ce;
  if (codebook_term) loss = add(loss, sum_squares(sub(stop_gradient(encoder_out), quantized)));
  return add(loss, scale(sum_squares(sub(encoder_out, stop_gradient(quantized))), static_cast<T>(beta)));
}

template Tensor<float> vq_loss<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, double, bool);
template Tensor<double> vq_loss<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, double,
                                        bool);

std::vector<std::size_t> ema_update(Codebook& cb, std::span<const float> embeddings,
                                    std::span<const std::size_t> indices, std::mt19937_64* rng) {
  const std::size_t I = cb.width_;
  if (embeddings.size() != indices.size() * I) {
    throw ShapeError("ema_update: " + std::to_string(indices.size()) + " assignments for " +
                     std::to_string(embeddings.size()) + " embedding values of width " + std::to_string(I));
  }
  std::vector<double> n(cb.size_, 0.0);
  std::vector<double> s(cb.size_ * I, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= cb.size_) throw ContractError("ema_update: index " + std::to_string(k) + " out of range");
    n[k] += 1.0;
    for (std::size_t d = 0; d < I; ++d) s[k * I + d] += embeddings[i * I + d];
  }
  const double lambda = cb.decay_;
  std::vector<std::size_t> dead;
  for (std::size_t k = 0; k < cb.size_; ++k) {
    cb.counts_[k] = static_cast<float>(static_cast<double>(cb.counts_[k]) * lambda + n[k] * (1.0 - lambda));
    for (std::size_t d = 0; d < I; ++d) {
      float& m = cb.sums_[k * I + d];
      m = static_cast<float>(static_cast<double>(m) * lambda + s[k * I + d] * (1.0 - lambda));
    }
    if (cb.counts_[k] < kDeadCountThreshold) {
      dead.push_back(k);
      if (rng && !indices.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, indices.size() - 1);
        const std::size_t row = pick(*rng);
        cb.counts_[k] = 1.0f;
        std::copy_n(embeddings.begin() + static_cast<std::ptrdiff_t>(row * I), I,
                    cb.sums_.begin() + static_cast<std::ptrdiff_t>(k * I));
      } else if (cb.counts_[k] <= 0.0f) {
        continue;  // flagged; entry keeps its last value
      }
    }
    for (std::size_t d = 0; d < I; ++d) cb.z_[k * I + d] = cb.sums_[k * I + d] / cb.counts_[k];
  }
  return dead;
}

void seed_codebook(Codebook& cb, std::span<const float> samples, std::mt19937_64& rng) {
  const std::size_t I = cb.width_;
  if (samples.empty() || samples.size() % I != 0) throw ShapeError("seed_codebook: samples must be [n x I]");
  const std::size_t n = samples.size() / I;
  auto row = [&](std::size_t r) { return samples.subspan(r * I, I); };

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  double rms = 0.0;
  for (float v : samples) rms += static_cast<double>(v) * v;
  rms = std::sqrt(rms / static_cast<double>(samples.size()));
  std::normal_distribution<double> jitter(0.0, 0.01 * std::max(rms, 1e-6));

  std::uniform_int_distribution<std::size_t> uniform_row(0, n - 1);
  for (std::size_t k = 0; k < cb.size_; ++k) {
    double total = 0.0;
    if (k > 0)
      for (double v : d2) total += v;
    std::size_t chosen;
    bool jittered = false;
    if (k == 0 || total <= 0.0) {
      chosen = uniform_row(rng);
      jittered = k > 0;
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (std::size_t r = 0; r < n; ++r) {
        target -= d2[r];
        if (target < 0.0) {
          chosen = r;
          break;
        }
      }
    }
    const auto src = row(chosen);
    for (std::size_t d = 0; d < I; ++d) {
      float v = src[d];
      if (jittered) v += static_cast<float>(jitter(rng));
      cb.z_[k * I + d] = v;
    }
    const auto entry = std::span<const float>(cb.z_).subspan(k * I, I);
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], squared_distance<float>(row(r), entry));
  }
  cb.sums_ = cb.z_;
  std::fill(cb.counts_.begin(), cb.counts_.end(), 1.0f);
}

double uniform_prior_kl(std::size_t codebook_size) {
  if (codebook_size == 0) throw ContractError("uniform_prior_kl: codebook size must be positive");
  return std::log(static_cast<double>(codebook_size));
}

}  // namespace vql
