#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vqlatent/tensor.hpp"

namespace vql::ad {

// Differentiable kernels. Two-dimensional operands are [rows x cols],
// row-major. Every op records a backward closure when any input requires a
// gradient and recording is enabled.

/// [m x k] * [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// x[n x m] + bias[m], broadcast over rows.
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Max-stabilized softmax along `axis`. Throws NumericError on NaN input.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes each row over the last axis, then multiplies by `gamma` and
/// adds `beta` when it is defined.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta = {}, T eps = T(1e-5));

/// Rows of `table` selected by `ids`; the backward pass scatter-adds.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids);

/// Mean token cross-entropy of softmax(logits) against `targets`.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> targets);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// Squared Frobenius norm.
template <typename T>
Tensor<T> sum_squares(const Tensor<T>& x);
/// Column-wise mean of a [n x m] tensor -> [m].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count);
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

/// Forward value equal to `x`, no gradient flows to `x`.
template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x);

/// Forward value is exactly `value`; the incoming gradient is passed to
/// `source` unchanged. Equivalent to source + sg(value - source) without the
/// rounding of the explicit sum.
template <typename T>
Tensor<T> straight_through(const Tensor<T>& source, const Tensor<T>& value);

/// Inverted dropout; identity when `rate == 0`.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, T rate, std::mt19937_64& rng);

}  // namespace vql::ad
