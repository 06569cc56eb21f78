#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "hccrm/generator.hpp"
#include "hccrm/hawkes_pair.hpp"
#include "hccrm/quadrature.hpp"
#include "hccrm/random_measures.hpp"

namespace hccrm {

enum class MomentMethod { quadrature, monte_carlo };

inline const char* to_string(MomentMethod m) { return m == MomentMethod::quadrature ? "quadrature" : "monte-carlo"; }

struct MomentEstimate {
  double value = 0.0;
  double stderr_ = 0.0;            // Monte Carlo standard error, 0 for quadrature
  double truncation_bound = 0.0;   // bound on the omitted w0 < eps contribution
  MomentMethod method = MomentMethod::quadrature;
};

struct MomentOptions {
  MomentMethod method = MomentMethod::quadrature;
  std::size_t samples = 4000;
  double eps = 1e-6;
  std::uint64_t seed = 1;
  double tolerance = 1e-8;
};

/// E[I] = alpha^2 mu_w' mu_w (delta/(delta-eta) T - eta/(delta-eta)^2 (1 - e^(-T(delta-eta)))).
inline double expected_interactions(const GgpHyper& h, const CcrmHyper& c, const KernelParams& k, double T) {
  const auto m = mean_measure(h, c);
  double dot = 0.0;
  for (double v : m.mean_w()) dot += v * v;
  return h.alpha * h.alpha * dot * expected_count(1.0, k, T);
}

namespace detail {

// int g(w) rho(dw) for p = 1 by nested quadrature: outer over w0 against rho0,
// inner over the gamma score through its quantile function.
template <class G>
double integrate_rho_p1(G&& g, const GgpHyper& h, const CcrmHyper& c, double tolerance) {
  const double a = c.a[0];
  const double b = c.b[0];
  auto over_beta = [&](double w0) {
    auto in_u = [&](double u) {
      if (u <= 0.0 || u >= 1.0) return 0.0;
      const double q = u < 0.5 ? boost::math::gamma_p_inv(a, u) : boost::math::gamma_q_inv(a, 1.0 - u);
      if (!std::isfinite(q)) return 0.0;
      return g(w0 * q / b);
    };
    double error = 0.0;
    return guarded("integrate_rho_p1", [&] { return tanh_sinh_rule().integrate(in_u, 0.0, 1.0, tolerance, &error); });
  };
  return integrate_rho0(over_beta, h.sigma, h.tau, 0.0, tolerance);
}

// Importance sampling over rho restricted to w0 > eps (exact for sigma < 0).
// Returns (mass * mean, mass * sd / sqrt(n)).
template <class G>
std::pair<double, double> sample_rho(G&& g, const GgpHyper& h, const CcrmHyper& c, const MomentOptions& opt) {
  Rng rng(opt.seed);
  double mass = 0.0;
  std::unique_ptr<TruncatedGgpSampler> truncated;
  if (h.sigma < 0.0) {
    mass = std::pow(h.tau, h.sigma) / (-h.sigma);
  } else {
    truncated = std::make_unique<TruncatedGgpSampler>(h.sigma, h.tau, opt.eps);
    mass = truncated->mass();
  }
  std::vector<double> w(c.p());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t n = 0; n < opt.samples; ++n) {
    const double w0 = truncated ? (*truncated)(rng) : gamma_shape_rate(rng, -h.sigma, h.tau);
    for (std::size_t k = 0; k < c.p(); ++k) w[k] = w0 * gamma_shape_rate(rng, c.a[k], c.b[k]);
    const double v = g(std::span<const double>(w));
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(opt.samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) * n / std::max(1.0, n - 1.0);
  return {mass * mean, mass * std::sqrt(var / n)};
}

// Bound on int_{w0 < eps} 2T w . mu_w rho(dw), using psi(2T w) <= 2T w . mu_w.
inline double small_atom_bound(const GgpHyper& h, const CcrmHyper& c, double T, double eps) {
  if (h.sigma < 0.0) return 0.0;
  const auto m = mean_measure(h, c);
  double s = 0.0;
  for (std::size_t k = 0; k < c.p(); ++k) s += m.mean_w()[k] * c.a[k] / c.b[k];
  // int_0^eps w0 rho0(dw0) = tau^(sigma-1) P(1 - sigma, tau eps).
  const double head = std::pow(h.tau, h.sigma - 1.0) * boost::math::gamma_p(1.0 - h.sigma, h.tau * eps);
  return 2.0 * T * s * head;
}

}  // namespace detail

/// E[E] = alpha^2 / 2 * int psi(2T w) rho(dw).
inline MomentEstimate expected_edges(const GgpHyper& h, const CcrmHyper& c, double T, const MomentOptions& opt = {}) {
  h.validate();
  c.validate();
  if (!(T >= 0.0)) throw std::invalid_argument("expected_edges: T must be >= 0");
  MomentEstimate out;
  out.method = c.p() == 1 ? opt.method : MomentMethod::monte_carlo;
  if (T == 0.0) return out;
  const double scale = 0.5 * h.alpha * h.alpha;
  if (out.method == MomentMethod::quadrature) {
    auto g = [&](double w) {
      const double t = 2.0 * T * w;
      return laplace_exponent(std::span<const double>(&t, 1), h, c);
    };
    out.value = scale * detail::integrate_rho_p1(g, h, c, opt.tolerance);
  } else {
    std::vector<double> t(c.p());
    auto g = [&](std::span<const double> w) {
      for (std::size_t k = 0; k < w.size(); ++k) t[k] = 2.0 * T * w[k];
      return laplace_exponent(t, h, c);
    };
    const auto [v, se] = detail::sample_rho(g, h, c, opt);
    out.value = scale * v;
    out.stderr_ = scale * se;
    out.truncation_bound = scale * detail::small_atom_bound(h, c, T, opt.eps);
  }
  return out;
}

/// E[V] = alpha * int (1 - exp(-alpha psi(2T w))) rho(dw).
inline MomentEstimate expected_nodes(const GgpHyper& h, const CcrmHyper& c, double T, const MomentOptions& opt = {}) {
  h.validate();
  c.validate();
  if (!(T >= 0.0)) throw std::invalid_argument("expected_nodes: T must be >= 0");
  MomentEstimate out;
  out.method = c.p() == 1 ? opt.method : MomentMethod::monte_carlo;
  if (T == 0.0) return out;
  if (out.method == MomentMethod::quadrature) {
    auto g = [&](double w) {
      const double t = 2.0 * T * w;
      return -std::expm1(-h.alpha * laplace_exponent(std::span<const double>(&t, 1), h, c));
    };
    out.value = h.alpha * detail::integrate_rho_p1(g, h, c, opt.tolerance);
  } else {
    std::vector<double> t(c.p());
    auto g = [&](std::span<const double> w) {
      for (std::size_t k = 0; k < w.size(); ++k) t[k] = 2.0 * T * w[k];
      return -std::expm1(-h.alpha * laplace_exponent(t, h, c));
    };
    const auto [v, se] = detail::sample_rho(g, h, c, opt);
    out.value = h.alpha * v;
    out.stderr_ = h.alpha * se;
    out.truncation_bound = h.alpha * h.alpha * detail::small_atom_bound(h, c, T, opt.eps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical sparsity diagnostics.

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Ordinary least squares y = intercept + slope x with a 95% interval on the slope.
inline SlopeFit fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: need >= 2 matched points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_slope: degenerate grid");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.stderr_ = std::sqrt(rss / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_low = f.slope - q * f.stderr_;
    f.ci_high = f.slope + q * f.stderr_;
  } else {
    f.ci_low = f.ci_high = f.slope;
  }
  return f;
}

enum class GridAxis { alpha, horizon };

struct SparsityPoint {
  double grid_value = 0.0;
  double mean_nodes = 0.0;
  double mean_edges = 0.0;
  double mean_interactions = 0.0;
};

struct SparsityReport {
  GridAxis axis = GridAxis::alpha;
  std::vector<SparsityPoint> points;
  SlopeFit edges_vs_nodes;
  SlopeFit nodes_vs_grid;
  SlopeFit edges_vs_grid;
  SlopeFit interactions_vs_grid;
  bool dense = true;  // false when the E-vs-V slope is significantly below 2
};

/// Generates `replicates` networks per grid point (alpha or T) and fits
/// log-log slopes of the replicate means.
inline SparsityReport sparsity_diagnostic(const GgpHyper& h, const CcrmHyper& c, const KernelParams& k, double T,
                                          GridAxis axis, std::span<const double> grid, std::size_t replicates,
                                          std::uint64_t seed, const GeneratorOptions& gen = {}) {
  if (grid.size() < 2) throw std::invalid_argument("sparsity_diagnostic: need at least two grid values");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("sparsity_diagnostic: grid must be strictly increasing");
  }
  if (replicates == 0) throw std::invalid_argument("sparsity_diagnostic: replicates must be >= 1");
  SparsityReport report;
  report.axis = axis;
  std::uint64_t task = 0;
  for (double g : grid) {
    GgpHyper hh = h;
    double horizon = T;
    (axis == GridAxis::alpha ? hh.alpha : horizon) = g;
    SparsityPoint pt{g, 0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < replicates; ++r, ++task) {
      const auto counts = network_counts(generate(hh, c, k, horizon, stream_seed(seed, task), gen));
      pt.mean_nodes += counts.nodes;
      pt.mean_edges += counts.edges;
      pt.mean_interactions += counts.interactions;
    }
    pt.mean_nodes /= static_cast<double>(replicates);
    pt.mean_edges /= static_cast<double>(replicates);
    pt.mean_interactions /= static_cast<double>(replicates);
    if (!(pt.mean_nodes > 0.0 && pt.mean_edges > 0.0)) {
      throw std::invalid_argument("sparsity_diagnostic: empty networks at grid value " + std::to_string(g));
    }
    report.points.push_back(pt);
  }
  std::vector<double> lg, lv, le, li;
  for (const auto& pt : report.points) {
    lg.push_back(std::log(pt.grid_value));
    lv.push_back(std::log(pt.mean_nodes));
    le.push_back(std::log(pt.mean_edges));
    li.push_back(std::log(pt.mean_interactions));
  }
  report.edges_vs_nodes = fit_slope(lv, le);
  report.nodes_vs_grid = fit_slope(lg, lv);
  report.edges_vs_grid = fit_slope(lg, le);
  report.interactions_vs_grid = fit_slope(lg, li);
  report.dense = report.edges_vs_nodes.ci_high >= 2.0;
  return report;
}

}  // namespace hccrm
