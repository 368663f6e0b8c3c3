#include "kernels.hpp"

#include <algorithm>

namespace liwt::kernels {

namespace {
constexpr std::int64_t kBlockK = 128;
constexpr std::int64_t kBlockN = 512;
}  // namespace

template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::int64_t j0 = 0; j0 < n; j0 += kBlockN) {
      const std::int64_t j1 = std::min(n, j0 + kBlockN);
      for (std::int64_t p0 = 0; p0 < k; p0 += kBlockK) {
        const std::int64_t p1 = std::min(k, p0 + kBlockK);
        for (std::int64_t p = p0; p < p1; ++p) {
          const T av = arow[p];
          if (av == T(0)) continue;
          const T* brow = b + p * n;
          for (std::int64_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* a, std::int64_t rows, std::int64_t cols) {
  std::vector<T> out(static_cast<std::size_t>(rows * cols));
  constexpr std::int64_t tile = 32;
  for (std::int64_t i0 = 0; i0 < rows; i0 += tile) {
    for (std::int64_t j0 = 0; j0 < cols; j0 += tile) {
      const auto i1 = std::min(rows, i0 + tile);
      const auto j1 = std::min(cols, j0 + tile);
      for (std::int64_t i = i0; i < i1; ++i)
        for (std::int64_t j = j0; j < j1; ++j) out[j * rows + i] = a[i * cols + j];
    }
  }
  return out;
}

template void gemm(const float*, const float*, float*, std::int64_t, std::int64_t, std::int64_t, bool);
template void gemm(const double*, const double*, double*, std::int64_t, std::int64_t, std::int64_t, bool);
template std::vector<float> transposed(const float*, std::int64_t, std::int64_t);
template std::vector<double> transposed(const double*, std::int64_t, std::int64_t);

}  // namespace liwt::kernels
