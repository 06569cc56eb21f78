#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace hccrm {

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double variance_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

// Linear-interpolation quantile (type 7).
inline double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile_of: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile_of: q outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Potential scale reduction factor over chains of equal length.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need >= 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw std::invalid_argument("gelman_rubin: need >= 2 draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains differ in length");
  }
  const double m = static_cast<double>(chains.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    w += variance_of(c);
  }
  w /= m;
  const double b = static_cast<double>(n) * variance_of(means);
  if (!(w > 0.0)) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * w + b / nn;
  return std::sqrt(var_plus / w);
}

}  // namespace hccrm
