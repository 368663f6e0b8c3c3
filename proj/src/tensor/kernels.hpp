#pragma once

#include <cstdint>
#include <vector>

namespace liwt::kernels {

// C[m x n] (+)= A[m x k] * B[k x n], all row-major and contiguous.
// Rows of C are split across threads; each element's reduction order is
// fixed, so results do not depend on the thread count.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate);

template <typename T>
std::vector<T> transposed(const T* a, std::int64_t rows, std::int64_t cols);

}  // namespace liwt::kernels
