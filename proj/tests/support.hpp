#pragma once

// Test-only oracles. Nothing here calls into the library code paths it is
// used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace hccrm::testing {

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Integral over (lo, hi) after the substitution w = e^x, Simpson in x.
inline double simpson_log(const std::function<double(double)>& f, double lo, double hi, std::size_t n = 40000) {
  return simpson([&](double x) { const double w = std::exp(x); return f(w) * w; }, std::log(lo), std::log(hi), n);
}

// Gamma function by quadrature of x^(s-1) e^(-x), s > 0.
inline double gamma_by_quadrature(double s) {
  // x = u^(1/s) removes the endpoint singularity: Gamma(s) = (1/s) int e^(-u^(1/s)) du.
  return simpson([&](double u) { return std::exp(-std::pow(u, 1.0 / s)); }, 0.0, std::pow(60.0, s), 400000) / s;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Two-sample KS statistic.
inline double ks_statistic_2(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Asymptotic Kolmogorov distribution: P(sqrt(n) D > x).
inline double kolmogorov_pvalue(double sqrt_n_d) {
  if (sqrt_n_d < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * sqrt_n_d * sqrt_n_d);
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double ks_pvalue(std::vector<double> xs, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(xs.size());
  const double d = ks_statistic(std::move(xs), cdf);
  // Stephens' finite-sample correction.
  return kolmogorov_pvalue(d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)));
}

inline double ks_pvalue_2(std::vector<double> a, std::vector<double> b) {
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  const double d = ks_statistic_2(std::move(a), std::move(b));
  return kolmogorov_pvalue(d * (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)));
}

// Naive O(n^2) log-likelihood of one direction: sum over own events of
// log(mu + eta sum_{u < t} e^(-delta (t-u))) minus the compensator at T.
inline double naive_direction_loglik(std::span<const double> own, std::span<const double> other, double mu,
                                     double eta, double delta, double T) {
  double ll = 0.0;
  for (double t : own) {
    double lambda = mu;
    for (double u : other) {
      if (u < t) lambda += eta * std::exp(-delta * (t - u));
    }
    ll += std::log(lambda);
  }
  double comp = mu * T;
  for (double u : other) {
    if (u < T) comp += eta / delta * (1.0 - std::exp(-delta * (T - u)));
  }
  return ll - comp;
}

}  // namespace hccrm::testing
