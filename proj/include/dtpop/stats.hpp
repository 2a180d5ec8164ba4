#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dtpop {

// Ordinary least-squares slope of `ys` against x = 0, 1, 2, ... (per step).
// A single point has slope 0.
inline double ols_slope(std::span<const double> ys) {
  if (ys.empty()) throw std::invalid_argument("ols_slope: empty series");
  const auto n = static_cast<double>(ys.size());
  if (ys.size() == 1) return 0.0;
  const double x_mean = (n - 1.0) / 2.0;
  double y_mean = 0.0;
  for (double y : ys) y_mean += y;
  y_mean /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (ys[i] - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// Nearest-rank quantile of an ascending sample: element ceil(q * n), 1-based.
template <class T>
T nearest_rank(std::span<const T> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("nearest_rank: empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

// Median of an ascending sample; midpoint average for even n.
template <class T>
double median_sorted(std::span<const T> sorted) {
  if (sorted.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
  return (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
}

template <class T>
double median(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  return median_sorted<T>(values);
}

}  // namespace dtpop
