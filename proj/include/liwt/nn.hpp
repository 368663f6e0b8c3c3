#pragma once

// Layer primitives over channel-last feature maps (H x W x C).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "liwt/coords.hpp"
#include "liwt/ops.hpp"
#include "liwt/tensor.hpp"

namespace liwt {

enum class Padding { zero, none };

template <typename T>
struct Conv2dParams {
  Tensor<T> weight;  // k x k x Cin x Cout
  Tensor<T> bias;    // Cout
  int stride = 1;
  Padding padding = Padding::zero;

  std::int64_t kernel() const { return weight.dim(0); }
  std::int64_t in_channels() const { return weight.dim(2); }
  std::int64_t out_channels() const { return weight.dim(3); }
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // din x dout
  Tensor<T> bias;    // dout
};

// Kaiming-uniform fan-in weights with negative slope sqrt(5), i.e. bound
// gain / sqrt(fan_in); zero bias.
template <typename T>
Conv2dParams<T> make_conv2d(std::int64_t k, std::int64_t cin, std::int64_t cout, std::mt19937_64& rng, T gain = T(1));
template <typename T>
LinearParams<T> make_linear(std::int64_t din, std::int64_t dout, std::mt19937_64& rng, T gain = T(1));

// Patch matrix [H'W' x k*k*C] with columns ordered (ky, kx, c).
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, std::int64_t k, int stride, std::int64_t pad);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p);

// 3x3 window, stride 1, replicate border; ties resolve to the first
// element in row-major window order.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x);

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p);

// [H x W x C] -> [C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

enum class Interp { nearest, bilinear, bicubic };

// Bicubic convolution kernel with a = -0.5.
double cubic_weight(double d);

// Source rows and weights for sampling an h x w lattice at continuous
// points. Border handling clamps tap indices.
template <typename T>
struct SampleTaps {
  std::vector<std::int64_t> rows;
  std::vector<T> weights;
  std::int64_t taps = 1;
};

template <typename T>
SampleTaps<T> sample_taps(std::int64_t h, std::int64_t w, std::span<const Point2> points, Interp mode);

// [H x W x C] sampled at points -> [len x C].
template <typename T>
Tensor<T> sample_at(const Tensor<T>& x, std::span<const Point2> points, Interp mode = Interp::nearest);

// Resizes [H x W x C] to [out_h x out_w x C] by sampling at output pixel
// centers, so pixel i maps to source position (i + 0.5) * H / out_h - 0.5.
template <typename T>
Tensor<T> resample(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w, Interp mode);

}  // namespace liwt
