#pragma once

#include <complex>
#include <cstdint>
#include <span>

namespace annih {

// Exact binomial coefficient as a double; n up to the low hundreds stays
// within the 53-bit integer range for the k we use (k <= 8 in practice).
inline double binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  std::uint64_t num = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    num = num * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return static_cast<double>(num);
}

// n(n-1)...(n-m+1); zero once the product crosses zero.
inline double falling_factorial(std::int64_t n, std::int64_t m) {
  double p = 1.0;
  for (std::int64_t i = 0; i < m; ++i) p *= static_cast<double>(n - i);
  return p;
}

// Summation over a fixed binary tree: independent of how the values were
// produced (thread count, chunking) and more accurate than a running sum.
template <typename T>
T pairwise_sum(std::span<const T> v) {
  if (v.size() <= 16) {
    T s{};
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(std::span<const double> v) { return pairwise_sum<double>(v); }
inline std::complex<double> pairwise_sum(std::span<const std::complex<double>> v) {
  return pairwise_sum<std::complex<double>>(v);
}

}  // namespace annih
