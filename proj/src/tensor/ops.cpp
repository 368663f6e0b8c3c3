#include "liwt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"

namespace liwt {

using detail::make_result;
using detail::Node;

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

int normalize_axis(const char* op, int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw InvalidArgument(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                          std::to_string(rank));
  }
  return a;
}

// Extent products before, at and after an axis.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename T>
T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_result<T>(a.shape(), std::move(out), "add", {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result<T>(a.shape(), std::move(out), "sub", {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_result<T>(a.shape(), std::move(out), "mul", {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(a.shape(), std::move(out), "scale", {a.node()}, [factor](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return make_result<T>(a.shape(), std::move(out), "relu", {a.node()}, [](Node<T>& self) {
    auto& p = self.parents[0];
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (p->data[i] > T(0)) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = T(1) / (T(1) + std::exp(-v));
  return make_result<T>(a.shape(), std::move(out), "sigmoid", {a.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T y = self.data[i];
      g[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = std::abs(v);
  return make_result<T>(a.shape(), std::move(out), "abs", {a.node()}, [](Node<T>& self) {
    auto& p = self.parents[0];
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * sign_of(p->data[i]);
  });
}

template <typename T>
Tensor<T> l1(const Tensor<T>& a, const Tensor<T>& b, Reduction reduction) {
  require_same_shape("l1", a, b);
  const auto ad = a.data();
  const auto bd = b.data();
  double total = 0.0;
  for (std::size_t i = 0; i < ad.size(); ++i) total += std::abs(static_cast<double>(ad[i]) - bd[i]);
  const double norm = reduction == Reduction::mean ? 1.0 / static_cast<double>(ad.size()) : 1.0;
  std::vector<T> out{static_cast<T>(total * norm)};
  return make_result<T>(Shape{}, std::move(out), "l1", {a.node(), b.node()}, [norm](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const T g0 = static_cast<T>(self.grad[0] * norm);
    for (std::size_t i = 0; i < pa->data.size(); ++i) {
      const T s = sign_of(pa->data[i] - pb->data[i]) * g0;
      if (pa->requires_grad) pa->ensure_grad()[i] += s;
      if (pb->requires_grad) pb->ensure_grad()[i] -= s;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  return make_result<T>(Shape{}, {total}, "sum", {a.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  return make_result<T>(Shape{}, {total * inv}, "mean", {a.node()}, [inv](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> sum_last(const Tensor<T>& a) {
  if (a.rank() < 1) throw InvalidArgument("sum_last: rank-0 input");
  const std::int64_t d = a.dim(-1);
  const std::int64_t rows = a.numel() / d;
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<T> out(static_cast<std::size_t>(rows), T(0));
  const auto ad = a.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::int64_t j = 0; j < d; ++j) acc += ad[r * d + j];
    out[r] = acc;
  }
  return make_result<T>(std::move(shape), std::move(out), "sum_last", {a.node()}, [d, rows](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t j = 0; j < d; ++j) g[r * d + j] += self.grad[r];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw InvalidArgument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(static_cast<std::size_t>(m * n));
  kernels::gemm(a.data().data(), b.data().data(), out.data(), m, k, n, false);
  return make_result<T>(Shape{m, n}, std::move(out), "matmul", {a.node(), b.node()}, [m, k, n](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      // dA = dC * B^T
      const auto bt = kernels::transposed(pb->data.data(), k, n);
      kernels::gemm(self.grad.data(), bt.data(), pa->ensure_grad().data(), m, n, k, true);
    }
    if (pb->requires_grad) {
      // dB = A^T * dC
      const auto at = kernels::transposed(pa->data.data(), m, k);
      kernels::gemm(at.data(), self.grad.data(), pb->ensure_grad().data(), k, m, n, true);
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int ax = normalize_axis("softmax", axis, x.rank());
  const auto s = split_at(x.shape(), ax);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const auto xd = x.data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t in = 0; in < s.inner; ++in) {
      const std::int64_t base = o * s.extent * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::int64_t e = 0; e < s.extent; ++e) mx = std::max(mx, xd[base + e * s.inner]);
      T total = T(0);
      for (std::int64_t e = 0; e < s.extent; ++e) {
        const T v = std::exp(xd[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      const T inv = T(1) / total;
      for (std::int64_t e = 0; e < s.extent; ++e) out[base + e * s.inner] *= inv;
    }
  }
  return make_result<T>(x.shape(), std::move(out), "softmax", {x.node()}, [s](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t in = 0; in < s.inner; ++in) {
        const std::int64_t base = o * s.extent * s.inner + in;
        T dot = T(0);
        for (std::int64_t e = 0; e < s.extent; ++e) {
          const auto i = base + e * s.inner;
          dot += self.grad[i] * self.data[i];
        }
        for (std::int64_t e = 0; e < s.extent; ++e) {
          const auto i = base + e * s.inner;
          g[i] += self.data[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  const int rank = parts.front().rank();
  const int ax = normalize_axis("concat", axis, rank);
  Shape shape = parts.front().shape();
  shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw InvalidArgument("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != ax && p.shape()[i] != parts.front().shape()[i]) {
        throw InvalidArgument("concat: extent mismatch " + shape_str(p.shape()) + " vs " +
                              shape_str(parts.front().shape()) + " off axis " + std::to_string(ax));
      }
    }
    shape[ax] += p.shape()[ax];
  }
  const auto s = split_at(shape, ax);
  const std::int64_t row = s.extent * s.inner;
  std::vector<std::int64_t> widths;
  std::vector<T> out(static_cast<std::size_t>(numel(shape)));
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t w = p.shape()[ax] * s.inner;
    widths.push_back(w);
    const auto pd = p.data();
    for (std::int64_t o = 0; o < s.outer; ++o)
      std::copy_n(pd.begin() + o * w, w, out.begin() + o * row + offset);
    offset += w;
  }
  std::vector<std::shared_ptr<Node<T>>> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  return make_result<T>(std::move(shape), std::move(out), "concat", std::move(parents),
                        [widths, row, outer = s.outer](Node<T>& self) {
                          std::int64_t off = 0;
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            auto& p = self.parents[k];
                            const auto w = widths[k];
                            if (p->requires_grad) {
                              auto& g = p->ensure_grad();
                              for (std::int64_t o = 0; o < outer; ++o)
                                for (std::int64_t j = 0; j < w; ++j) g[o * w + j] += self.grad[o * row + off + j];
                            }
                            off += w;
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw InvalidArgument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  for (auto e : shape) {
    if (e <= 0) throw InvalidArgument("reshape: non-positive extent in " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), "reshape", {x.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw InvalidArgument("transpose: expected rank 2, got " + shape_str(x.shape()));
  const auto r = x.dim(0), c = x.dim(1);
  auto out = kernels::transposed(x.data().data(), r, c);
  return make_result<T>(Shape{c, r}, std::move(out), "transpose", {x.node()}, [r, c](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis("slice", axis, x.rank());
  if (start < 0 || length <= 0 || start + length > x.shape()[ax]) {
    throw InvalidArgument("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                          ") outside extent " + std::to_string(x.shape()[ax]));
  }
  const auto s = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape[ax] = length;
  const std::int64_t src_row = s.extent * s.inner;
  const std::int64_t dst_row = length * s.inner;
  const std::int64_t off = start * s.inner;
  std::vector<T> out(static_cast<std::size_t>(s.outer * dst_row));
  const auto xd = x.data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    std::copy_n(xd.begin() + o * src_row + off, dst_row, out.begin() + o * dst_row);
  return make_result<T>(std::move(shape), std::move(out), "slice", {x.node()},
                        [outer = s.outer, src_row, dst_row, off](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::int64_t o = 0; o < outer; ++o)
                            for (std::int64_t j = 0; j < dst_row; ++j)
                              g[o * src_row + off + j] += self.grad[o * dst_row + j];
                        });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int64_t> rows) {
  if (x.rank() < 1) throw InvalidArgument("gather_rows: rank-0 input");
  if (rows.empty()) throw InvalidArgument("gather_rows: empty index list");
  const std::int64_t n = x.dim(0);
  const std::int64_t width = x.numel() / n;
  std::vector<T> out(rows.size() * static_cast<std::size_t>(width));
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = rows[r];
    if (src < 0 || src >= n) {
      throw InvalidArgument("gather_rows: index " + std::to_string(src) + " out of range [0, " + std::to_string(n) + ")");
    }
    std::copy_n(xd.begin() + src * width, width, out.begin() + static_cast<std::int64_t>(r) * width);
  }
  Shape shape = x.shape();
  shape[0] = static_cast<std::int64_t>(rows.size());
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return make_result<T>(std::move(shape), std::move(out), "gather_rows", {x.node()},
                        [idx = std::move(idx), width](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t r = 0; r < idx.size(); ++r) {
                            const T* src = self.grad.data() + static_cast<std::int64_t>(r) * width;
                            T* dst = g.data() + idx[r] * width;
                            for (std::int64_t j = 0; j < width; ++j) dst[j] += src[j];
                          }
                        });
}

template <typename T>
Tensor<T> weighted_gather(const Tensor<T>& x, std::span<const std::int64_t> rows, std::span<const T> weights,
                          std::int64_t taps) {
  if (x.rank() < 1) throw InvalidArgument("weighted_gather: rank-0 input");
  if (taps <= 0 || rows.empty() || rows.size() % static_cast<std::size_t>(taps) != 0 || weights.size() != rows.size()) {
    throw InvalidArgument("weighted_gather: index/weight lists must be equal non-empty multiples of the tap count");
  }
  const std::int64_t n = x.dim(0);
  const std::int64_t width = x.numel() / n;
  const std::int64_t m = static_cast<std::int64_t>(rows.size()) / taps;
  for (auto r : rows) {
    if (r < 0 || r >= n) throw InvalidArgument("weighted_gather: index " + std::to_string(r) + " out of range");
  }
  std::vector<T> out(static_cast<std::size_t>(m * width), T(0));
  const T* xd = x.data().data();
#pragma omp parallel for schedule(static) if (m * width > 65536)
  for (std::int64_t i = 0; i < m; ++i) {
    T* dst = out.data() + i * width;
    for (std::int64_t t = 0; t < taps; ++t) {
      const T w = weights[i * taps + t];
      const T* src = xd + rows[i * taps + t] * width;
      for (std::int64_t j = 0; j < width; ++j) dst[j] += w * src[j];
    }
  }
  Shape shape = x.shape();
  shape[0] = m;
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  std::vector<T> wts(weights.begin(), weights.end());
  return make_result<T>(std::move(shape), std::move(out), "weighted_gather", {x.node()},
                        [idx = std::move(idx), wts = std::move(wts), taps, m, width](Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::int64_t i = 0; i < m; ++i) {
                            const T* src = self.grad.data() + i * width;
                            for (std::int64_t t = 0; t < taps; ++t) {
                              const T w = wts[i * taps + t];
                              T* dst = g.data() + idx[i * taps + t] * width;
                              for (std::int64_t j = 0; j < width; ++j) dst[j] += w * src[j];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& b) {
  if (b.rank() != 1 || x.rank() < 1 || x.dim(-1) != b.dim(0)) {
    throw InvalidArgument("bias_add: bias " + shape_str(b.shape()) + " does not match trailing axis of " +
                          shape_str(x.shape()));
  }
  const std::int64_t d = b.dim(0);
  const std::int64_t rows = x.numel() / d;
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto bd = b.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < d; ++j) out[r * d + j] += bd[j];
  return make_result<T>(x.shape(), std::move(out), "bias_add", {x.node(), b.node()}, [d, rows](Node<T>& self) {
    auto& px = self.parents[0];
    auto& pb = self.parents[1];
    if (px->requires_grad) {
      auto& g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
    }
  });
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.rank() != 1 || x.rank() < 1 || x.dim(-1) != s.dim(0)) {
    throw InvalidArgument("scale_channels: scale " + shape_str(s.shape()) + " does not match trailing axis of " +
                          shape_str(x.shape()));
  }
  const std::int64_t d = s.dim(0);
  const std::int64_t rows = x.numel() / d;
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto sd = s.data();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < d; ++j) out[r * d + j] *= sd[j];
  return make_result<T>(x.shape(), std::move(out), "scale_channels", {x.node(), s.node()}, [d, rows](Node<T>& self) {
    auto& px = self.parents[0];
    auto& ps = self.parents[1];
    if (px->requires_grad) {
      auto& g = px->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) g[r * d + j] += self.grad[r * d + j] * ps->data[j];
    }
    if (ps->requires_grad) {
      auto& g = ps->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j] * px->data[r * d + j];
    }
  });
}

template <typename T>
Tensor<T> repeat_interleave(const Tensor<T>& x, std::int64_t times) {
  if (times <= 0) throw InvalidArgument("repeat_interleave: times must be positive");
  if (x.rank() < 1) throw InvalidArgument("repeat_interleave: rank-0 input");
  Shape shape = x.shape();
  shape.back() *= times;
  const auto n = x.numel();
  std::vector<T> out(static_cast<std::size_t>(n * times));
  const auto xd = x.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t t = 0; t < times; ++t) out[i * times + t] = xd[i];
  return make_result<T>(std::move(shape), std::move(out), "repeat_interleave", {x.node()}, [n, times](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      T acc = T(0);
      for (std::int64_t t = 0; t < times; ++t) acc += self.grad[i * times + t];
      g[i] += acc;
    }
  });
}

#define LIWT_INSTANTIATE_OPS(T)                                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                 \
  template Tensor<T> abs(const Tensor<T>&);                                                                     \
  template Tensor<T> l1(const Tensor<T>&, const Tensor<T>&, Reduction);                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                                    \
  template Tensor<T> sum_last(const Tensor<T>&);                                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                                \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                          \
  template Tensor<T> transpose(const Tensor<T>&);                                                               \
  template Tensor<T> slice(const Tensor<T>&, int, std::int64_t, std::int64_t);                                  \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int64_t>);                              \
  template Tensor<T> weighted_gather(const Tensor<T>&, std::span<const std::int64_t>, std::span<const T>,       \
                                     std::int64_t);                                                             \
  template Tensor<T> bias_add(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> repeat_interleave(const Tensor<T>&, std::int64_t);

LIWT_INSTANTIATE_OPS(float)
LIWT_INSTANTIATE_OPS(double)

}  // namespace liwt
