#pragma once

// Single-level orthonormal 2D Haar transform over H x W x C feature maps.

#include <array>

#include "liwt/tensor.hpp"

namespace liwt {

enum class Band { ll = 0, lh = 1, hl = 2, hh = 3 };

// 2x2 analysis kernel, [row][col]; row is the vertical axis.
using HaarKernel = std::array<std::array<double, 2>, 2>;

// LL, LH, HL, HH as outer products of L = [1,1]/sqrt2 and H = [-1,1]/sqrt2.
// LH is high-pass vertically and so responds to horizontal edges.
const std::array<HaarKernel, 4>& haar_kernels();

template <typename T>
struct SubBands {
  Tensor<T> ll, lh, hl, hh;

  const Tensor<T>& operator[](Band b) const;
};

// Stride-2 correlation of every channel with one Haar kernel.
template <typename T>
Tensor<T> haar_analysis(const Tensor<T>& x, Band band);

// Transpose of haar_analysis: [h x w x C] -> [2h x 2w x C].
template <typename T>
Tensor<T> haar_synthesis(const Tensor<T>& band_map, Band band);

template <typename T>
SubBands<T> dwt(const Tensor<T>& x);

template <typename T>
Tensor<T> idwt(const SubBands<T>& bands);

template <typename T>
struct FrequencySplit {
  Tensor<T> low;   // LL, h x w x C
  Tensor<T> high;  // concat(LH, HL, HH), h x w x 3C
};

template <typename T>
FrequencySplit<T> split_freq(const SubBands<T>& bands);

}  // namespace liwt
