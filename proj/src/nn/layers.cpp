#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "liwt/nn.hpp"

namespace liwt {

using detail::make_result;
using detail::Node;

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, T bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

void require_hwc(const char* op, const Shape& s) {
  if (s.size() != 3) throw InvalidArgument(std::string(op) + ": expected H x W x C input, got " + shape_str(s));
}

}  // namespace

template <typename T>
Conv2dParams<T> make_conv2d(std::int64_t k, std::int64_t cin, std::int64_t cout, std::mt19937_64& rng, T gain) {
  const T bound = gain * static_cast<T>(1.0 / std::sqrt(static_cast<double>(k * k * cin)));
  Conv2dParams<T> p;
  p.weight = uniform_tensor<T>({k, k, cin, cout}, bound, rng).set_requires_grad(true);
  p.bias = Tensor<T>(Shape{cout}, T(0)).set_requires_grad(true);
  p.padding = Padding::zero;
  return p;
}

template <typename T>
LinearParams<T> make_linear(std::int64_t din, std::int64_t dout, std::mt19937_64& rng, T gain) {
  const T bound = gain * static_cast<T>(1.0 / std::sqrt(static_cast<double>(din)));
  LinearParams<T> p;
  p.weight = uniform_tensor<T>({din, dout}, bound, rng).set_requires_grad(true);
  p.bias = Tensor<T>(Shape{dout}, T(0)).set_requires_grad(true);
  return p;
}

template <typename T>
Tensor<T> im2col(const Tensor<T>& x, std::int64_t k, int stride, std::int64_t pad) {
  require_hwc("im2col", x.shape());
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (k < 1 || stride < 1 || pad < 0) throw InvalidArgument("im2col: invalid kernel geometry");
  const std::int64_t span_h = h + 2 * pad - k;
  const std::int64_t span_w = w + 2 * pad - k;
  if (span_h < 0 || span_w < 0) {
    throw InvalidArgument("im2col: input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(k));
  }
  if (span_h % stride != 0 || span_w % stride != 0) {
    throw InvalidArgument("im2col: extents " + shape_str(x.shape()) + " not divisible for stride " +
                          std::to_string(stride) + " with kernel " + std::to_string(k));
  }
  const std::int64_t oh = span_h / stride + 1, ow = span_w / stride + 1;
  const std::int64_t cols = k * k * c;
  std::vector<T> out(static_cast<std::size_t>(oh * ow * cols), T(0));
  const auto xd = x.data();
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      T* dst = out.data() + (oy * ow + ox) * cols;
      for (std::int64_t ky = 0; ky < k; ++ky) {
        const std::int64_t iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= h) continue;
        for (std::int64_t kx = 0; kx < k; ++kx) {
          const std::int64_t ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= w) continue;
          std::copy_n(xd.begin() + (iy * w + ix) * c, c, dst + (ky * k + kx) * c);
        }
      }
    }
  }
  return make_result<T>(Shape{oh * ow, cols}, std::move(out), "im2col", {x.node()},
                        [=](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::int64_t oy = 0; oy < oh; ++oy) {
                            for (std::int64_t ox = 0; ox < ow; ++ox) {
                              const T* src = self.grad.data() + (oy * ow + ox) * cols;
                              for (std::int64_t ky = 0; ky < k; ++ky) {
                                const std::int64_t iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                for (std::int64_t kx = 0; kx < k; ++kx) {
                                  const std::int64_t ix = ox * stride + kx - pad;
                                  if (ix < 0 || ix >= w) continue;
                                  T* dst = g.data() + (iy * w + ix) * c;
                                  const T* s = src + (ky * k + kx) * c;
                                  for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += s[ch];
                                }
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<T>& p) {
  require_hwc("conv2d", x.shape());
  if (p.weight.rank() != 4 || p.weight.dim(0) != p.weight.dim(1)) {
    throw InvalidArgument("conv2d: weight must be k x k x Cin x Cout, got " + shape_str(p.weight.shape()));
  }
  const std::int64_t k = p.kernel(), cin = p.in_channels(), cout = p.out_channels();
  if (x.dim(2) != cin) {
    throw InvalidArgument("conv2d: input has " + std::to_string(x.dim(2)) + " channels, weight expects " +
                          std::to_string(cin));
  }
  if (p.bias.rank() != 1 || p.bias.dim(0) != cout) throw InvalidArgument("conv2d: bias shape mismatch");
  std::int64_t pad = 0;
  if (p.padding == Padding::zero) {
    if (k % 2 == 0) throw InvalidArgument("conv2d: size-preserving padding needs an odd kernel");
    pad = (k - 1) / 2;
  }
  const std::int64_t h = x.dim(0), w = x.dim(1);
  const std::int64_t oh = (h + 2 * pad - k) / p.stride + 1;
  const std::int64_t ow = (w + 2 * pad - k) / p.stride + 1;
  Tensor<T> cols = (k == 1 && p.stride == 1) ? reshape(x, Shape{h * w, cin}) : im2col(x, k, p.stride, pad);
  auto y = matmul(cols, reshape(p.weight, Shape{k * k * cin, cout}));
  y = bias_add(y, p.bias);
  return reshape(y, Shape{oh, ow, cout});
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x) {
  require_hwc("maxpool2d", x.shape());
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  std::vector<std::int64_t> argmax(out.size());
  const auto xd = x.data();
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        std::int64_t best = -1;
        T best_v = T(0);
        for (int di = -1; di <= 1; ++di) {
          const auto ii = std::clamp<std::int64_t>(i + di, 0, h - 1);
          for (int dj = -1; dj <= 1; ++dj) {
            const auto jj = std::clamp<std::int64_t>(j + dj, 0, w - 1);
            const auto src = (ii * w + jj) * c + ch;
            if (best < 0 || xd[src] > best_v) {
              best = src;
              best_v = xd[src];
            }
          }
        }
        const auto dst = (i * w + j) * c + ch;
        out[dst] = best_v;
        argmax[dst] = best;
      }
    }
  }
  return make_result<T>(x.shape(), std::move(out), "maxpool2d", {x.node()},
                        [argmax = std::move(argmax)](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  if (p.weight.rank() != 2 || p.bias.rank() != 1 || p.bias.dim(0) != p.weight.dim(1)) {
    throw InvalidArgument("linear: inconsistent parameters " + shape_str(p.weight.shape()) + ", " +
                          shape_str(p.bias.shape()));
  }
  const std::int64_t din = p.weight.dim(0), dout = p.weight.dim(1);
  if (x.rank() < 1 || x.dim(-1) != din) {
    throw InvalidArgument("linear: input " + shape_str(x.shape()) + " does not end in " + std::to_string(din));
  }
  const std::int64_t rows = x.numel() / din;
  auto y = bias_add(matmul(x.rank() == 2 ? x : reshape(x, Shape{rows, din}), p.weight), p.bias);
  if (x.rank() == 2) return y;
  Shape shape = x.shape();
  shape.back() = dout;
  return reshape(y, std::move(shape));
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_hwc("global_avg_pool", x.shape());
  const std::int64_t n = x.dim(0) * x.dim(1), c = x.dim(2);
  std::vector<T> out(static_cast<std::size_t>(c), T(0));
  const auto xd = x.data();
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t ch = 0; ch < c; ++ch) out[ch] += xd[r * c + ch];
  const T inv = T(1) / static_cast<T>(n);
  for (auto& v : out) v *= inv;
  return make_result<T>(Shape{c}, std::move(out), "global_avg_pool", {x.node()}, [n, c, inv](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t r = 0; r < n; ++r)
      for (std::int64_t ch = 0; ch < c; ++ch) g[r * c + ch] += self.grad[ch] * inv;
  });
}

double cubic_weight(double d) {
  constexpr double a = -0.5;
  const double t = std::abs(d);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

struct AxisTaps {
  std::array<std::int64_t, 4> idx{};
  std::array<double, 4> w{};
  int count = 0;
};

AxisTaps axis_taps(double coord, std::int64_t n, Interp mode) {
  AxisTaps t;
  const auto clampi = [n](std::int64_t i) { return std::clamp<std::int64_t>(i, 0, n - 1); };
  if (mode == Interp::nearest) {
    const double u = (coord + 1.0) * static_cast<double>(n) / 2.0;
    t.count = 1;
    t.idx[0] = u > 0.0 ? clampi(static_cast<std::int64_t>(std::floor(u))) : 0;
    t.w[0] = 1.0;
    return t;
  }
  double u = (coord + 1.0) * static_cast<double>(n) / 2.0 - 0.5;
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9) u = r;
  const double f = std::floor(u);
  const double frac = u - f;
  const auto i0 = static_cast<std::int64_t>(f);
  if (mode == Interp::bilinear) {
    t.count = 2;
    t.idx = {clampi(i0), clampi(i0 + 1), 0, 0};
    t.w = {1.0 - frac, frac, 0.0, 0.0};
    return t;
  }
  t.count = 4;
  for (int k = 0; k < 4; ++k) {
    t.idx[k] = clampi(i0 - 1 + k);
    t.w[k] = cubic_weight(frac - static_cast<double>(k - 1));
  }
  return t;
}

}  // namespace

template <typename T>
SampleTaps<T> sample_taps(std::int64_t h, std::int64_t w, std::span<const Point2> points, Interp mode) {
  SampleTaps<T> st;
  const int per_axis = mode == Interp::nearest ? 1 : (mode == Interp::bilinear ? 2 : 4);
  st.taps = per_axis * per_axis;
  st.rows.reserve(points.size() * static_cast<std::size_t>(st.taps));
  st.weights.reserve(st.rows.capacity());
  for (const auto& p : points) {
    const auto ty = axis_taps(p.y, h, mode);
    const auto tx = axis_taps(p.x, w, mode);
    for (int a = 0; a < ty.count; ++a) {
      for (int b = 0; b < tx.count; ++b) {
        st.rows.push_back(ty.idx[a] * w + tx.idx[b]);
        st.weights.push_back(static_cast<T>(ty.w[a] * tx.w[b]));
      }
    }
  }
  return st;
}

template <typename T>
Tensor<T> sample_at(const Tensor<T>& x, std::span<const Point2> points, Interp mode) {
  require_hwc("sample_at", x.shape());
  if (points.empty()) throw InvalidArgument("sample_at: no points");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const auto flat = reshape(x, Shape{h * w, c});
  const auto taps = sample_taps<T>(h, w, points, mode);
  if (mode == Interp::nearest) return gather_rows(flat, taps.rows);
  return weighted_gather(flat, taps.rows, std::span<const T>(taps.weights), taps.taps);
}

template <typename T>
Tensor<T> resample(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w, Interp mode) {
  require_hwc("resample", x.shape());
  if (out_h < 1 || out_w < 1) throw InvalidArgument("resample: output extents must be positive");
  const auto points = pixel_centers(out_h, out_w);
  return reshape(sample_at(x, points, mode), Shape{out_h, out_w, x.dim(2)});
}

#define LIWT_INSTANTIATE_NN(T)                                                                                  \
  template Conv2dParams<T> make_conv2d(std::int64_t, std::int64_t, std::int64_t, std::mt19937_64&, T);          \
  template LinearParams<T> make_linear(std::int64_t, std::int64_t, std::mt19937_64&, T);                        \
  template Tensor<T> im2col(const Tensor<T>&, std::int64_t, int, std::int64_t);                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Conv2dParams<T>&);                                          \
  template Tensor<T> maxpool2d(const Tensor<T>&);                                                               \
  template Tensor<T> linear(const Tensor<T>&, const LinearParams<T>&);                                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                         \
  template SampleTaps<T> sample_taps(std::int64_t, std::int64_t, std::span<const Point2>, Interp);              \
  template Tensor<T> sample_at(const Tensor<T>&, std::span<const Point2>, Interp);                              \
  template Tensor<T> resample(const Tensor<T>&, std::int64_t, std::int64_t, Interp);

LIWT_INSTANTIATE_NN(float)
LIWT_INSTANTIATE_NN(double)

}  // namespace liwt
