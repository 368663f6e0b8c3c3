#include "liwt/wavelet.hpp"

#include <cmath>
#include <string>

#include "liwt/ops.hpp"

namespace liwt {

using detail::make_result;
using detail::Node;

const std::array<HaarKernel, 4>& haar_kernels() {
  static const std::array<HaarKernel, 4> kernels = [] {
    const double r = 1.0 / std::sqrt(2.0);
    const std::array<double, 2> low{r, r};
    const std::array<double, 2> high{-r, r};
    // Kernel[row][col] = vertical_filter[row] * horizontal_filter[col].
    auto outer = [](const std::array<double, 2>& v, const std::array<double, 2>& h) {
      HaarKernel k{};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) k[a][b] = v[a] * h[b];
      return k;
    };
    std::array<HaarKernel, 4> k{outer(low, low), outer(high, low), outer(low, high), outer(high, high)};
    // Round the +-1/2 products so constant inputs cancel exactly.
    for (auto& kernel : k)
      for (auto& row : kernel)
        for (auto& v : row) v = v > 0 ? 0.5 : -0.5;
    return k;
  }();
  return kernels;
}

template <typename T>
const Tensor<T>& SubBands<T>::operator[](Band b) const {
  switch (b) {
    case Band::ll: return ll;
    case Band::lh: return lh;
    case Band::hl: return hl;
    case Band::hh: return hh;
  }
  return ll;
}

template <typename T>
Tensor<T> haar_analysis(const Tensor<T>& x, Band band) {
  if (x.rank() != 3) throw InvalidArgument("dwt: expected H x W x C input, got " + shape_str(x.shape()));
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw InvalidArgument("dwt: extents must be even, got " + shape_str(x.shape()));
  const auto& kd = haar_kernels()[static_cast<int>(band)];
  const std::array<T, 4> k{static_cast<T>(kd[0][0]), static_cast<T>(kd[0][1]), static_cast<T>(kd[1][0]),
                           static_cast<T>(kd[1][1])};
  const std::int64_t oh = h / 2, ow = w / 2;
  std::vector<T> out(static_cast<std::size_t>(oh * ow * c));
  const auto xd = x.data();
  for (std::int64_t i = 0; i < oh; ++i) {
    for (std::int64_t j = 0; j < ow; ++j) {
      const T* p00 = xd.data() + ((2 * i) * w + 2 * j) * c;
      const T* p01 = p00 + c;
      const T* p10 = p00 + w * c;
      const T* p11 = p10 + c;
      T* dst = out.data() + (i * ow + j) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        dst[ch] = k[0] * p00[ch] + k[1] * p01[ch] + k[2] * p10[ch] + k[3] * p11[ch];
      }
    }
  }
  return make_result<T>(Shape{oh, ow, c}, std::move(out), "dwt", {x.node()}, [k, w, oh, ow, c](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        T* p00 = g.data() + ((2 * i) * w + 2 * j) * c;
        T* p01 = p00 + c;
        T* p10 = p00 + w * c;
        T* p11 = p10 + c;
        const T* src = self.grad.data() + (i * ow + j) * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          p00[ch] += k[0] * src[ch];
          p01[ch] += k[1] * src[ch];
          p10[ch] += k[2] * src[ch];
          p11[ch] += k[3] * src[ch];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> haar_synthesis(const Tensor<T>& band_map, Band band) {
  if (band_map.rank() != 3) throw InvalidArgument("idwt: expected h x w x C band, got " + shape_str(band_map.shape()));
  const std::int64_t h = band_map.dim(0), w = band_map.dim(1), c = band_map.dim(2);
  const auto& kd = haar_kernels()[static_cast<int>(band)];
  const std::array<T, 4> k{static_cast<T>(kd[0][0]), static_cast<T>(kd[0][1]), static_cast<T>(kd[1][0]),
                           static_cast<T>(kd[1][1])};
  const std::int64_t oh = 2 * h, ow = 2 * w;
  std::vector<T> out(static_cast<std::size_t>(oh * ow * c));
  const auto bd = band_map.data();
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      T* p00 = out.data() + ((2 * i) * ow + 2 * j) * c;
      T* p01 = p00 + c;
      T* p10 = p00 + ow * c;
      T* p11 = p10 + c;
      const T* src = bd.data() + (i * w + j) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        p00[ch] = k[0] * src[ch];
        p01[ch] = k[1] * src[ch];
        p10[ch] = k[2] * src[ch];
        p11[ch] = k[3] * src[ch];
      }
    }
  }
  return make_result<T>(Shape{oh, ow, c}, std::move(out), "idwt", {band_map.node()}, [k, h, w, ow, c](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        const T* p00 = self.grad.data() + ((2 * i) * ow + 2 * j) * c;
        const T* p01 = p00 + c;
        const T* p10 = p00 + ow * c;
        const T* p11 = p10 + c;
        T* dst = g.data() + (i * w + j) * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          dst[ch] += k[0] * p00[ch] + k[1] * p01[ch] + k[2] * p10[ch] + k[3] * p11[ch];
        }
      }
    }
  });
}

template <typename T>
SubBands<T> dwt(const Tensor<T>& x) {
  return {haar_analysis(x, Band::ll), haar_analysis(x, Band::lh), haar_analysis(x, Band::hl),
          haar_analysis(x, Band::hh)};
}

template <typename T>
Tensor<T> idwt(const SubBands<T>& bands) {
  const auto& s = bands.ll.shape();
  if (bands.lh.shape() != s || bands.hl.shape() != s || bands.hh.shape() != s) {
    throw InvalidArgument("idwt: sub-band shapes disagree");
  }
  auto x = add(haar_synthesis(bands.ll, Band::ll), haar_synthesis(bands.lh, Band::lh));
  x = add(x, haar_synthesis(bands.hl, Band::hl));
  return add(x, haar_synthesis(bands.hh, Band::hh));
}

template <typename T>
FrequencySplit<T> split_freq(const SubBands<T>& bands) {
  return {bands.ll, concat(std::vector<Tensor<T>>{bands.lh, bands.hl, bands.hh}, 2)};
}

template struct SubBands<float>;
template struct SubBands<double>;
template Tensor<float> haar_analysis(const Tensor<float>&, Band);
template Tensor<double> haar_analysis(const Tensor<double>&, Band);
template Tensor<float> haar_synthesis(const Tensor<float>&, Band);
template Tensor<double> haar_synthesis(const Tensor<double>&, Band);
template SubBands<float> dwt(const Tensor<float>&);
template SubBands<double> dwt(const Tensor<double>&);
template Tensor<float> idwt(const SubBands<float>&);
template Tensor<double> idwt(const SubBands<double>&);
template FrequencySplit<float> split_freq(const SubBands<float>&);
template FrequencySplit<double> split_freq(const SubBands<double>&);

}  // namespace liwt
