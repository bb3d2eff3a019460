#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ospo {

struct Correlation {
  double pearson = 0.0;
  double spearman = 0.0;
  bool pearson_defined = false;
  bool spearman_defined = false;
};

namespace detail {

inline bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [&](double x) { return x == v.front(); });
}

inline double pearson_raw(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks (1-based); ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = shared;
    i = j + 1;
  }
  return rank;
}

}  // namespace detail

// Pearson and Spearman (average-rank) correlation between an attribution
// vector and ground-truth weights. A constant input leaves the coefficient
// undefined; it is reported as 0 with the corresponding flag cleared.
inline Correlation credit_accuracy(std::span<const double> phi,
                                   std::span<const double> truth) {
  if (phi.size() != truth.size())
    throw std::invalid_argument("credit_accuracy: length mismatch");
  if (phi.size() < 2)
    throw std::invalid_argument("credit_accuracy: need at least 2 entries");
  Correlation c;
  if (!detail::is_constant(phi) && !detail::is_constant(truth)) {
    c.pearson = detail::pearson_raw(phi, truth);
    c.pearson_defined = true;
  }
  const std::vector<double> rp = detail::average_ranks(phi);
  const std::vector<double> rt = detail::average_ranks(truth);
  if (!detail::is_constant(rp) && !detail::is_constant(rt)) {
    c.spearman = detail::pearson_raw(rp, rt);
    c.spearman_defined = true;
  }
  return c;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace ospo
