#pragma once

#include <cstddef>
#include <span>

namespace ascvol {

/// Pairwise (tree) sum of f(i) for i in [first, last). Split points depend
/// only on the range, so the result is reproducible for a given input
/// regardless of how callers parallelize around it.
template <typename F>
double pairwise_sum_index(std::size_t first, std::size_t last, const F& f) {
  constexpr std::size_t kLeaf = 64;
  if (last - first <= kLeaf) {
    double s = 0.0;
    for (std::size_t i = first; i < last; ++i) s += f(i);
    return s;
  }
  const std::size_t mid = first + (last - first) / 2;
  return pairwise_sum_index(first, mid, f) + pairwise_sum_index(mid, last, f);
}

/// Pairwise sum of term(i, xs[i]).
template <typename T, typename F>
double pairwise_sum(std::span<const T> xs, const F& term) {
  return pairwise_sum_index(0, xs.size(), [&](std::size_t i) { return term(i, xs[i]); });
}

template <typename T>
double pairwise_sum(std::span<const T> xs) {
  return pairwise_sum_index(0, xs.size(), [&](std::size_t i) { return static_cast<double>(xs[i]); });
}

}  // namespace ascvol
