#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "hccrm/quadrature.hpp"
#include "hccrm/random.hpp"

namespace hccrm {

// Generalized gamma process hyperparameters. alpha is the size of the label
// window [0, alpha]; the label base measure is Lebesgue.
struct GgpHyper {
  double alpha = 1.0;
  double sigma = 0.0;
  double tau = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("GgpHyper: alpha must be > 0");
    if (!(sigma < 1.0) || !std::isfinite(sigma)) throw std::invalid_argument("GgpHyper: sigma must be < 1");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("GgpHyper: tau must be > 0");
  }
};

// Gamma(a_k, b_k) community scores, (shape, rate) parameterization.
struct CcrmHyper {
  std::vector<double> a;
  std::vector<double> b;

  std::size_t p() const { return a.size(); }

  static CcrmHyper uniform(std::size_t p, double a, double b) {
    return CcrmHyper{std::vector<double>(p, a), std::vector<double>(p, b)};
  }

  void validate() const {
    if (a.empty()) throw std::invalid_argument("CcrmHyper: p must be >= 1");
    if (a.size() != b.size()) throw std::invalid_argument("CcrmHyper: a and b differ in length");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!(a[k] > 0.0) || !std::isfinite(a[k])) throw std::invalid_argument("CcrmHyper: a_k must be > 0");
      if (!(b[k] > 0.0) || !std::isfinite(b[k])) throw std::invalid_argument("CcrmHyper: b_k must be > 0");
    }
  }
};

struct GgpAtom {
  double theta = 0.0;
  double w0 = 0.0;
};

struct NodeAtom {
  double theta = 0.0;
  double w0 = 0.0;
  std::vector<double> beta;
  std::vector<double> w;  // w[k] == w0 * beta[k]
};

/// Levy density of the GGP sociabilities,
/// rho0(w0) = w0^(-1-sigma) e^(-tau w0) / Gamma(1 - sigma).
inline double ggp_levy_density(double w0, const GgpHyper& h) {
  if (!(w0 > 0.0)) throw std::invalid_argument("ggp_levy_density: w0 must be > 0");
  return std::exp((-1.0 - h.sigma) * std::log(w0) - h.tau * w0 - std::lgamma(1.0 - h.sigma));
}

/// Expected number of atoms in [0, alpha]; +infinity when sigma >= 0.
inline double ggp_total_mass(const GgpHyper& h) {
  h.validate();
  if (h.sigma >= 0.0) return std::numeric_limits<double>::infinity();
  return h.alpha * std::pow(h.tau, h.sigma) / (-h.sigma);
}

/// Integral of f against rho0 over (lower, infinity).
template <class F>
double integrate_rho0(F&& f, double sigma, double tau, double lower = 0.0,
                      double tolerance = kQuadratureTolerance) {
  return integrate_ggp_kernel(std::forward<F>(f), sigma, tau, lower, tolerance) /
         std::tgamma(1.0 - sigma);
}

/// Mass of rho0 on (eps, infinity), per unit alpha.
inline double ggp_truncated_mass(double sigma, double tau, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("ggp_truncated_mass: eps must be > 0");
  return integrate_rho0([](double) { return 1.0; }, sigma, tau, eps);
}

// Exact sampler for the normalized restriction of rho0 to (eps, infinity).
//
// The CDF is tabulated over cells (log-spaced below 1, linear above) by
// quadrature; a cell is chosen by inverting the table and the point within
// the cell is drawn exactly by rejection from the w^(-1-sigma) envelope.
// Beyond the last cell w = hi + Exp(tau) is accepted with (w/hi)^(-1-sigma).
class TruncatedGgpSampler {
 public:
  TruncatedGgpSampler(double sigma, double tau, double eps) : sigma_(sigma), tau_(tau), eps_(eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("TruncatedGgpSampler: eps must be > 0");
    if (!(sigma < 1.0) || !(tau > 0.0)) throw std::invalid_argument("TruncatedGgpSampler: invalid hyperparameters");
    if (sigma < -1.0) throw std::invalid_argument("TruncatedGgpSampler: use the exact gamma sampler for sigma < -1");
    const double norm = std::tgamma(1.0 - sigma);
    std::vector<double> edges;
    if (eps < 1.0) {
      const auto n_log = static_cast<std::size_t>(std::ceil(std::log(1.0 / eps) / std::log(1.25)));
      for (std::size_t i = 0; i < n_log; ++i) {
        edges.push_back(eps * std::exp(std::log(1.0 / eps) * static_cast<double>(i) / static_cast<double>(n_log)));
      }
    }
    const double start = std::max(1.0, eps);
    const double step = 0.5 / tau;
    for (int i = 0; i <= 80; ++i) edges.push_back(start + step * i);
    edges_ = std::move(edges);
    // Cell masses in s = log w, where the integrand w^(-sigma) e^(-tau w) is smooth.
    auto density = [&](double s) { return std::exp(-sigma * s - tau * std::exp(s)) / norm; };
    cdf_.assign(edges_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < edges_.size(); ++c) {
      acc += integrate_interval(density, std::log(edges_[c]), std::log(edges_[c + 1]), 1e-12);
      cdf_[c + 1] = acc;
    }
    const double hi = edges_.back();
    tail_mass_ = integrate_rho0([](double) { return 1.0; }, sigma, tau, hi);
    mass_ = acc + tail_mass_;
  }

  double sigma() const { return sigma_; }
  double tau() const { return tau_; }
  double eps() const { return eps_; }

  /// Mass of rho0 on (eps, infinity).
  double mass() const { return mass_; }

  template <class URBG>
  double operator()(URBG& rng) const {
    const double u = uniform01(rng) * mass_;
    if (u >= cdf_.back()) return sample_tail(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto cell = static_cast<std::size_t>(std::distance(cdf_.begin(), it)) - 1;
    return sample_cell(rng, edges_[cell], edges_[cell + 1]);
  }

 private:
  template <class URBG>
  double sample_cell(URBG& rng, double lo, double hi) const {
    for (;;) {
      const double v = uniform01(rng);
      double w;
      if (sigma_ == 0.0) {
        w = lo * std::pow(hi / lo, v);
      } else {
        const double a = std::pow(lo, -sigma_);
        const double b = std::pow(hi, -sigma_);
        w = std::pow(a + v * (b - a), -1.0 / sigma_);
      }
      w = std::clamp(w, lo, hi);
      if (uniform01(rng) <= std::exp(-tau_ * (w - lo))) return w;
    }
  }

  template <class URBG>
  double sample_tail(URBG& rng) const {
    const double hi = edges_.back();
    for (;;) {
      const double w = hi + exponential(rng, tau_);
      if (uniform01(rng) <= std::pow(w / hi, -1.0 - sigma_)) return w;
    }
  }

  double sigma_;
  double tau_;
  double eps_;
  std::vector<double> edges_;
  std::vector<double> cdf_;
  double tail_mass_ = 0.0;
  double mass_ = 0.0;
};

/// Draws the GGP atoms on [0, alpha]. Exact for sigma < 0; for sigma >= 0
/// only atoms with w0 > eps are generated.
template <class URBG>
std::vector<GgpAtom> sample_ggp(const GgpHyper& h, double eps, URBG& rng) {
  h.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("sample_ggp: eps must be > 0");
  std::vector<GgpAtom> atoms;
  std::uniform_real_distribution<double> label(0.0, h.alpha);
  if (h.sigma < 0.0) {
    const auto count = poisson(rng, ggp_total_mass(h));
    atoms.reserve(count);
    for (std::uint64_t n = 0; n < count; ++n) {
      const double w0 = gamma_shape_rate(rng, -h.sigma, h.tau);
      atoms.push_back({label(rng), w0});
    }
  } else {
    const TruncatedGgpSampler sampler(h.sigma, h.tau, eps);
    const auto count = poisson(rng, h.alpha * sampler.mass());
    atoms.reserve(count);
    for (std::uint64_t n = 0; n < count; ++n) {
      const double w0 = sampler(rng);
      atoms.push_back({label(rng), w0});
    }
  }
  std::sort(atoms.begin(), atoms.end(), [](const GgpAtom& x, const GgpAtom& y) { return x.theta < y.theta; });
  return atoms;
}

/// Attaches independent Gamma(a_k, b_k) scores to every atom.
template <class URBG>
std::vector<NodeAtom> sample_ccrm(std::span<const GgpAtom> atoms, const CcrmHyper& c, URBG& rng) {
  c.validate();
  std::vector<NodeAtom> nodes;
  nodes.reserve(atoms.size());
  for (const auto& atom : atoms) {
    if (!(atom.w0 > 0.0)) throw std::invalid_argument("sample_ccrm: atom weight must be > 0");
    NodeAtom node{atom.theta, atom.w0, std::vector<double>(c.p()), std::vector<double>(c.p())};
    for (std::size_t k = 0; k < c.p(); ++k) {
      node.beta[k] = gamma_shape_rate(rng, c.a[k], c.b[k]);
      node.w[k] = atom.w0 * node.beta[k];
    }
    nodes.push_back(std::move(node));
  }
  return nodes;
}

/// Multivariate Laplace exponent per unit alpha,
/// psi(t) = int (1 - prod_k (1 + t_k w0 / b_k)^(-a_k)) rho0(dw0).
/// The gamma scores are integrated out analytically.
inline double laplace_exponent(std::span<const double> t, const GgpHyper& h, const CcrmHyper& c) {
  if (t.size() != c.p()) throw std::invalid_argument("laplace_exponent: dimension mismatch");
  bool all_zero = true;
  for (double tk : t) {
    if (!(tk >= 0.0) || !std::isfinite(tk)) throw std::invalid_argument("laplace_exponent: t must be >= 0");
    all_zero = all_zero && tk == 0.0;
  }
  if (all_zero) return 0.0;
  auto integrand = [&](double w0) {
    double log_prod = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) log_prod -= c.a[k] * std::log1p(t[k] * w0 / c.b[k]);
    return -std::expm1(log_prod);
  };
  return integrate_rho0(integrand, h.sigma, h.tau);
}

// Mean of the Levy measure, mu_w[k] = (a_k/b_k) tau^(sigma-1), plus a memo of
// psi evaluations. The memo takes shared locks for lookups and an exclusive
// lock for inserts.
class LevyMoments {
 public:
  LevyMoments(GgpHyper h, CcrmHyper c) : h_(h), c_(std::move(c)) {
    h_.validate();
    c_.validate();
    mean_w_.resize(c_.p());
    for (std::size_t k = 0; k < c_.p(); ++k) {
      mean_w_[k] = c_.a[k] / c_.b[k] * std::pow(h_.tau, h_.sigma - 1.0);
    }
  }

  LevyMoments(const LevyMoments& other) : h_(other.h_), c_(other.c_), mean_w_(other.mean_w_) {
    std::shared_lock lock(other.mutex_);
    psi_cache_ = other.psi_cache_;
  }

  const std::vector<double>& mean_w() const { return mean_w_; }
  const GgpHyper& ggp() const { return h_; }
  const CcrmHyper& ccrm() const { return c_; }

  double psi(std::span<const double> t) const {
    std::vector<double> key(t.begin(), t.end());
    {
      std::shared_lock lock(mutex_);
      if (auto it = psi_cache_.find(key); it != psi_cache_.end()) return it->second;
    }
    const double value = laplace_exponent(t, h_, c_);
    std::unique_lock lock(mutex_);
    psi_cache_.emplace(std::move(key), value);
    return value;
  }

  std::size_t cache_size() const {
    std::shared_lock lock(mutex_);
    return psi_cache_.size();
  }

 private:
  GgpHyper h_;
  CcrmHyper c_;
  std::vector<double> mean_w_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::vector<double>, double> psi_cache_;
};

inline LevyMoments mean_measure(const GgpHyper& h, const CcrmHyper& c) { return LevyMoments(h, c); }

}  // namespace hccrm
