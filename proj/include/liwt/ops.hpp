#pragma once

// Differentiable tensor operations. Binary elementwise ops require equal
// shapes; the only broadcasting is scalar `scale` and the explicit
// last-axis helpers (`bias_add`, `scale_channels`).

#include <cstdint>
#include <span>
#include <vector>

#include "liwt/tensor.hpp"

namespace liwt {

enum class Reduction { sum, mean };

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);

// Absolute-error loss reduced to a scalar.
template <typename T> Tensor<T> l1(const Tensor<T>& a, const Tensor<T>& b, Reduction reduction = Reduction::sum);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
// Sums over the trailing axis, dropping it.
template <typename T> Tensor<T> sum_last(const Tensor<T>& a);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
// Rank-2 transpose.
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T> Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);

// Treats x as [N x rest] and picks rows; gradients scatter-add back.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int64_t> rows);

// out[m] = sum_k weights[m*K+k] * x[rows[m*K+k]] over x viewed as [N x rest].
// Interpolation weights are constants; only x receives gradients.
template <typename T>
Tensor<T> weighted_gather(const Tensor<T>& x, std::span<const std::int64_t> rows, std::span<const T> weights,
                          std::int64_t taps);

// x[..., d] + b[d]
template <typename T> Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& b);
// x[..., d] * s[d]
template <typename T> Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);
// Repeats each trailing-axis element `times` times: [..., n] -> [..., n*times].
template <typename T> Tensor<T> repeat_interleave(const Tensor<T>& x, std::int64_t times);

}  // namespace liwt
