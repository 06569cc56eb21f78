#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hccrm/dataset.hpp"
#include "hccrm/quadrature.hpp"
#include "hccrm/random.hpp"
#include "hccrm/random_measures.hpp"

namespace hccrm {

// Stage 1: MCMC on the binary graph Z for the compound CRM weights and
// hyperparameters, then a permutation-aligned point estimate of the weights.
//
// The state keeps w_ik = w0_i * beta_ik in log coordinates, (log w0, log beta),
// so that the GGP and gamma priors stay separable. The HMC target given the
// latent counts n_ijk ~ Poisson(2T w_ik w_jk) is
//   sum_i [-sigma u_i - tau e^u_i] + sum_ik [a_k v_ik - b_k e^v_ik + m_ik (u_i + v_ik)]
//   - T sum_k [S_k^2 - sum_i w_ik^2 + 2 S_k w*_k]
// with u = log w0, v = log beta, S_k = sum_i w_ik and m_ik = sum_j n_ijk.
// Pairs among unobserved atoms (a w*^2 term) are left out.

inline constexpr std::uint64_t kStage1Salt = 11;
inline constexpr std::uint64_t kStage1InitSalt = 12;

struct HyperPrior {
  double shape = 0.01;
  double rate = 0.01;
};

struct Stage1Config {
  std::size_t p = 1;
  std::size_t iterations = 100000;
  std::size_t burn_in = std::numeric_limits<std::size_t>::max();  // default: half
  std::size_t thin = 10;
  std::size_t chains = 2;
  std::size_t init_iterations = std::numeric_limits<std::size_t>::max();  // default: iterations / 10, at most 2000
  int leapfrog = 10;
  double initial_step = 0.01;
  double target_hmc = 0.65;
  double target_hyper = 0.23;
  double initial_hyper_scale = 0.05;
  double eps = 1e-3;
  double rescale_scale = 1.0;  // 0 disables the rescaling move
  double community_scale = 0.2;  // 0 disables the per-community scale move
  HyperPrior prior;
  std::uint64_t seed = 1;

  std::size_t burn() const { return burn_in == std::numeric_limits<std::size_t>::max() ? iterations / 2 : burn_in; }
  std::size_t init_iters() const {
    return init_iterations == std::numeric_limits<std::size_t>::max() ? std::min<std::size_t>(iterations / 10, 2000)
                                                                       : init_iterations;
  }

  void validate() const {
    if (p == 0) throw std::invalid_argument("Stage1Config: p must be >= 1");
    if (thin == 0) throw std::invalid_argument("Stage1Config: thin must be >= 1");
    if (chains == 0) throw std::invalid_argument("Stage1Config: chains must be >= 1");
    if (leapfrog < 1) throw std::invalid_argument("Stage1Config: leapfrog must be >= 1");
    if (!(initial_step > 0.0) || !(initial_hyper_scale > 0.0)) throw std::invalid_argument("Stage1Config: step sizes must be > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("Stage1Config: eps must be > 0");
    if (burn() > iterations) throw std::invalid_argument("Stage1Config: burn-in exceeds iterations");
  }
};

struct Stage1State {
  std::size_t V = 0;
  std::size_t p = 1;
  std::vector<double> log_w0;     // V
  std::vector<double> log_beta;   // V x p, row-major
  std::vector<double> w_rem;      // p
  GgpHyper ggp;
  CcrmHyper ccrm;
  std::vector<std::uint32_t> counts;  // edge-major, E x p, aligned with Z.edges

  double weight(std::size_t i, std::size_t k) const { return std::exp(log_w0[i] + log_beta[i * p + k]); }

  std::vector<double> weights() const {
    std::vector<double> w(V * p);
    for (std::size_t i = 0; i < V; ++i) {
      for (std::size_t k = 0; k < p; ++k) w[i * p + k] = weight(i, k);
    }
    return w;
  }

  std::vector<double> column_sums() const {
    std::vector<double> s(p, 0.0);
    for (std::size_t i = 0; i < V; ++i) {
      for (std::size_t k = 0; k < p; ++k) s[k] += weight(i, k);
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Graph likelihood.

/// log P(Z | w) = sum over edges log(1 - e^(-2T mu_ij)) - sum over non-edges 2T mu_ij,
/// including the cross terms with the remainder masses w*.
inline double graph_loglik(std::span<const double> w, std::size_t p, std::span<const double> w_rem,
                           const BinaryGraph& Z, double T) {
  if (w.size() != Z.node_count * p || w_rem.size() != p) throw std::invalid_argument("graph_loglik: dimension mismatch");
  double exposure = 0.0;  // sum over pairs i < j of 2 T mu_ij, plus observed-remainder pairs
  for (std::size_t k = 0; k < p; ++k) {
    double s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < Z.node_count; ++i) {
      s += w[i * p + k];
      sq += w[i * p + k] * w[i * p + k];
    }
    exposure += T * (s * s - sq) + 2.0 * T * s * w_rem[k];
  }
  double ll = -exposure;
  for (const auto& [i, j] : Z.edges) {
    double mu = 0.0;
    for (std::size_t k = 0; k < p; ++k) mu += w[i * p + k] * w[j * p + k];
    const double m = 2.0 * T * mu;
    ll += std::log(-std::expm1(-m)) + m;
  }
  return ll;
}

inline double graph_loglik(const Stage1State& s, const BinaryGraph& Z, double T) {
  return graph_loglik(s.weights(), s.p, s.w_rem, Z, T);
}

// ---------------------------------------------------------------------------
// Latent counts.

/// Redraws n_ij. for every edge: total from a zero-truncated Poisson with the
/// summed rate, split multinomially by the community rates.
template <class URBG>
void sample_latent_counts(Stage1State& s, const BinaryGraph& Z, double T, URBG& rng) {
  const std::size_t p = s.p;
  s.counts.assign(Z.edges.size() * p, 0);
  std::vector<double> rate(p);
  for (std::size_t e = 0; e < Z.edges.size(); ++e) {
    const auto [i, j] = Z.edges[e];
    double total = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      rate[k] = 2.0 * T * s.weight(i, k) * s.weight(j, k);
      total += rate[k];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw std::domain_error("sample_latent_counts: connected pair with zero or non-finite rate");
    }
    auto n = zero_truncated_poisson(rng, total);
    double rest = total;
    for (std::size_t k = 0; k + 1 < p && n > 0; ++k) {
      const double q = std::clamp(rate[k] / rest, 0.0, 1.0);
      const auto x = static_cast<std::uint64_t>(
          std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(n), q)(rng));
      s.counts[e * p + k] = static_cast<std::uint32_t>(x);
      n -= x;
      rest -= rate[k];
    }
    s.counts[e * p + p - 1] += static_cast<std::uint32_t>(n);
  }
}

/// m_ik = sum over neighbours j of n_ijk.
inline std::vector<double> count_sums(const Stage1State& s, const BinaryGraph& Z) {
  std::vector<double> m(s.V * s.p, 0.0);
  for (std::size_t e = 0; e < Z.edges.size(); ++e) {
    const auto [i, j] = Z.edges[e];
    for (std::size_t k = 0; k < s.p; ++k) {
      m[i * s.p + k] += s.counts[e * s.p + k];
      m[j * s.p + k] += s.counts[e * s.p + k];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Weight update.

// Conditional log-density of x = (log w0 [V], log beta [V x p]) given latent
// count sums m, the remainder masses and the hyperparameters.
class WeightTarget {
 public:
  WeightTarget(const Stage1State& s, std::vector<double> m, double T)
      : V_(s.V), p_(s.p), m_(std::move(m)), w_rem_(s.w_rem), ggp_(s.ggp), ccrm_(s.ccrm), T_(T),
        w_(s.V * s.p), colsum_(s.p) {}

  std::size_t dimension() const { return V_ * (1 + p_); }

  double operator()(std::span<const double> x, std::span<double> grad) {
    const double sigma = ggp_.sigma, tau = ggp_.tau;
    std::fill(colsum_.begin(), colsum_.end(), 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < V_; ++i) {
      const double u = x[i];
      const double w0 = std::exp(u);
      value += -sigma * u - tau * w0;
      for (std::size_t k = 0; k < p_; ++k) {
        const double v = x[V_ + i * p_ + k];
        const double w = std::exp(u + v);
        w_[i * p_ + k] = w;
        colsum_[k] += w;
        value += ccrm_.a[k] * v - ccrm_.b[k] * std::exp(v) + m_[i * p_ + k] * (u + v);
      }
    }
    for (std::size_t k = 0; k < p_; ++k) {
      double sq = 0.0;
      for (std::size_t i = 0; i < V_; ++i) sq += w_[i * p_ + k] * w_[i * p_ + k];
      value -= T_ * (colsum_[k] * colsum_[k] - sq + 2.0 * colsum_[k] * w_rem_[k]);
    }
    if (!grad.empty()) {
      for (std::size_t i = 0; i < V_; ++i) {
        double gu = -sigma - tau * std::exp(x[i]);
        for (std::size_t k = 0; k < p_; ++k) {
          const double w = w_[i * p_ + k];
          const double g = m_[i * p_ + k] - 2.0 * T_ * w * (colsum_[k] + w_rem_[k] - w);
          gu += g;
          grad[V_ + i * p_ + k] = ccrm_.a[k] - ccrm_.b[k] * std::exp(x[V_ + i * p_ + k]) + g;
        }
        grad[i] = gu;
      }
    }
    return value;
  }

 private:
  std::size_t V_, p_;
  std::vector<double> m_;
  std::vector<double> w_rem_;
  GgpHyper ggp_;
  CcrmHyper ccrm_;
  double T_;
  std::vector<double> w_;
  std::vector<double> colsum_;
};

inline std::vector<double> pack_weights(const Stage1State& s) {
  std::vector<double> x(s.log_w0);
  x.insert(x.end(), s.log_beta.begin(), s.log_beta.end());
  return x;
}

inline void unpack_weights(Stage1State& s, std::span<const double> x) {
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(s.V), s.log_w0.begin());
  std::copy(x.begin() + static_cast<std::ptrdiff_t>(s.V), x.end(), s.log_beta.begin());
}

struct HmcStep {
  bool accepted = false;
  double accept_prob = 0.0;
  bool diverged = false;  // non-finite energy or gradient along the trajectory
};

/// One HMC transition with identity mass matrix. target(x, grad) returns the
/// log-density and fills grad.
template <class Target, class URBG>
HmcStep hmc_step(std::vector<double>& x, Target&& target, int leapfrog, double step, URBG& rng) {
  const std::size_t n = x.size();
  std::normal_distribution<double> normal;
  std::vector<double> mom(n), grad(n), y(x);
  double kinetic0 = 0.0;
  for (auto& q : mom) {
    q = normal(rng);
    kinetic0 += 0.5 * q * q;
  }
  const double lp0 = target(std::span<const double>(y), std::span<double>(grad));
  HmcStep out;
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double z) { return std::isfinite(z); });
  };
  if (!std::isfinite(lp0) || !finite(grad)) {
    out.diverged = true;
    return out;
  }
  for (std::size_t d = 0; d < n; ++d) mom[d] += 0.5 * step * grad[d];
  double lp1 = lp0;
  for (int l = 0; l < leapfrog; ++l) {
    for (std::size_t d = 0; d < n; ++d) y[d] += step * mom[d];
    lp1 = target(std::span<const double>(y), std::span<double>(grad));
    if (!std::isfinite(lp1) || !finite(grad)) {
      out.diverged = true;
      return out;
    }
    const double f = l + 1 < leapfrog ? 1.0 : 0.5;
    for (std::size_t d = 0; d < n; ++d) mom[d] += f * step * grad[d];
  }
  double kinetic1 = 0.0;
  for (double q : mom) kinetic1 += 0.5 * q * q;
  const double log_ratio = (lp1 - kinetic1) - (lp0 - kinetic0);
  out.accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
  if (uniform01(rng) < out.accept_prob) {
    x = std::move(y);
    out.accepted = true;
  }
  return out;
}

/// HMC move on all log-weights given latent counts, w* and hyperparameters.
template <class URBG>
HmcStep hmc_update_weights(Stage1State& s, const BinaryGraph& Z, double T, int leapfrog, double step, URBG& rng) {
  WeightTarget target(s, count_sums(s, Z), T);
  auto x = pack_weights(s);
  const auto r = hmc_step(x, target, leapfrog, step, rng);
  if (r.accepted) unpack_weights(s, x);
  return r;
}

// ---------------------------------------------------------------------------
// Hyperparameters and remainder mass.

// Coordinates of the hyper random walk: (log alpha, log(1 - sigma), log tau,
// log a_1..a_p, log b_1..b_p).
inline std::vector<double> hyper_coords(const GgpHyper& g, const CcrmHyper& c) {
  std::vector<double> th{std::log(g.alpha), std::log(1.0 - g.sigma), std::log(g.tau)};
  for (double a : c.a) th.push_back(std::log(a));
  for (double b : c.b) th.push_back(std::log(b));
  return th;
}

inline void hyper_from_coords(std::span<const double> th, std::size_t p, GgpHyper& g, CcrmHyper& c) {
  g.alpha = std::exp(th[0]);
  g.sigma = 1.0 - std::exp(th[1]);
  g.tau = std::exp(th[2]);
  c.a.resize(p);
  c.b.resize(p);
  for (std::size_t k = 0; k < p; ++k) {
    c.a[k] = std::exp(th[3 + k]);
    c.b[k] = std::exp(th[3 + p + k]);
  }
}

/// Log of the Gamma(shape, rate) priors on alpha, 1 - sigma, tau, a_k, b_k in
/// the log coordinates (Jacobian included).
inline double hyper_log_prior_coords(std::span<const double> th, const HyperPrior& prior) {
  double lp = 0.0;
  for (double t : th) lp += prior.shape * t - prior.rate * std::exp(t);
  return lp;
}

// Sufficient statistics of the observed weights for the hyper update.
struct WeightStats {
  std::size_t V = 0;
  double sum_log_w0 = 0.0;
  double sum_w0 = 0.0;
  std::vector<double> sum_log_beta;
  std::vector<double> sum_beta;
  std::vector<double> colsum;  // S_k
};

inline WeightStats weight_stats(const Stage1State& s) {
  WeightStats st;
  st.V = s.V;
  st.sum_log_beta.assign(s.p, 0.0);
  st.sum_beta.assign(s.p, 0.0);
  st.colsum.assign(s.p, 0.0);
  for (std::size_t i = 0; i < s.V; ++i) {
    st.sum_log_w0 += s.log_w0[i];
    st.sum_w0 += std::exp(s.log_w0[i]);
    for (std::size_t k = 0; k < s.p; ++k) {
      st.sum_log_beta[k] += s.log_beta[i * s.p + k];
      st.sum_beta[k] += std::exp(s.log_beta[i * s.p + k]);
      st.colsum[k] += s.weight(i, k);
    }
  }
  return st;
}

/// Target of the hyper update with w* integrated out:
///   V log alpha + sum_i log rho0(w0_i) + sum_ik log Gamma(beta_ik; a_k, b_k) - alpha psi(2T S).
inline double collapsed_hyper_target(std::span<const double> th, const WeightStats& st, double T,
                                     const HyperPrior& prior) {
  const std::size_t p = st.colsum.size();
  GgpHyper g;
  CcrmHyper c;
  hyper_from_coords(th, p, g, c);
  for (double t : th) {
    if (!std::isfinite(t) || std::abs(t) > 700.0) return -std::numeric_limits<double>::infinity();
  }
  const double V = static_cast<double>(st.V);
  double lt = hyper_log_prior_coords(th, prior);
  lt += V * std::log(g.alpha) + (-1.0 - g.sigma) * st.sum_log_w0 - g.tau * st.sum_w0 - V * std::lgamma(1.0 - g.sigma);
  std::vector<double> t(p);
  bool any = false;
  for (std::size_t k = 0; k < p; ++k) {
    lt += V * (c.a[k] * std::log(c.b[k]) - std::lgamma(c.a[k])) + (c.a[k] - 1.0) * st.sum_log_beta[k] -
          c.b[k] * st.sum_beta[k];
    t[k] = 2.0 * T * st.colsum[k];
    any = any || t[k] > 0.0;
  }
  if (any) {
    try {
      lt -= g.alpha * laplace_exponent(t, g, c);
    } catch (const numerical_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  }
  return std::isfinite(lt) ? lt : -std::numeric_limits<double>::infinity();
}

/// Draws w* from the unobserved atoms: a Poisson process with intensity
/// alpha rho0(w0) prod_k (1 + 2T w0 S_k / b_k)^(-a_k), restricted to w0 > eps
/// when sigma >= 0; each kept atom gets beta_k ~ Gamma(a_k, b_k + 2T w0 S_k).
template <class URBG>
std::vector<double> sample_remainder(const GgpHyper& g, const CcrmHyper& c, std::span<const double> colsum, double T,
                                     double eps, URBG& rng) {
  const std::size_t p = c.p();
  std::vector<double> rem(p, 0.0);
  auto keep = [&](double w0) {
    double log_keep = 0.0;
    for (std::size_t k = 0; k < p; ++k) log_keep -= c.a[k] * std::log1p(2.0 * T * w0 * colsum[k] / c.b[k]);
    if (uniform01(rng) >= std::exp(log_keep)) return;
    for (std::size_t k = 0; k < p; ++k) rem[k] += w0 * gamma_shape_rate(rng, c.a[k], c.b[k] + 2.0 * T * w0 * colsum[k]);
  };
  if (g.sigma < 0.0 && ggp_total_mass(g) < 1e6) {
    const auto n = poisson(rng, ggp_total_mass(g));
    for (std::uint64_t m = 0; m < n; ++m) keep(gamma_shape_rate(rng, -g.sigma, g.tau));
  } else {
    // Building the sampler dominates the cost; (sigma, tau) only move when a
    // hyper step is accepted, so keep the last one.
    thread_local std::optional<TruncatedGgpSampler> cache;
    const double sig = std::max(g.sigma, -1.0);
    if (!cache || cache->sigma() != sig || cache->tau() != g.tau || cache->eps() != eps) cache.emplace(sig, g.tau, eps);
    const auto& sampler = *cache;
    const auto n = poisson(rng, g.alpha * sampler.mass());
    for (std::uint64_t m = 0; m < n; ++m) keep(sampler(rng));
  }
  return rem;
}

struct HyperStep {
  bool accepted = false;
  double accept_prob = 0.0;
};

/// Random-walk MH on the hyper coordinates with w* integrated out. The
/// proposal sd of coordinate j is scale * shape[j] (shape empty: all ones).
template <class URBG>
HyperStep mh_step_hyper(Stage1State& s, const WeightStats& st, double T, double scale, std::span<const double> shape,
                        const HyperPrior& prior, URBG& rng) {
  auto th = hyper_coords(s.ggp, s.ccrm);
  const double current = collapsed_hyper_target(th, st, T, prior);
  std::normal_distribution<double> normal;
  auto prop = th;
  for (std::size_t j = 0; j < prop.size(); ++j) prop[j] += scale * (shape.empty() ? 1.0 : shape[j]) * normal(rng);
  const double proposed = collapsed_hyper_target(prop, st, T, prior);
  HyperStep out;
  const double log_ratio = proposed - current;
  out.accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : (proposed > current ? 1.0 : 0.0);
  if (uniform01(rng) < out.accept_prob) {
    hyper_from_coords(prop, s.p, s.ggp, s.ccrm);
    out.accepted = true;
  }
  return out;
}

/// Joint rescaling move w0 -> c w0, beta -> beta / c, tau -> tau / c,
/// b_k -> c b_k, alpha -> c^sigma alpha. The weights w, the likelihood and the
/// law of the CRM are unchanged, so in log coordinates (a translation) the
/// acceptance ratio is the hyper prior ratio alone. Without this move the
/// chain crawls along that direction by alternating weight and hyper updates.
template <class URBG>
HyperStep rescale_move(Stage1State& s, double scale, const HyperPrior& prior, URBG& rng) {
  const double shift = scale * std::normal_distribution<double>()(rng);
  auto th = hyper_coords(s.ggp, s.ccrm);
  auto prop = th;
  prop[0] += s.ggp.sigma * shift;
  prop[2] -= shift;
  for (std::size_t k = 0; k < s.p; ++k) prop[3 + s.p + k] += shift;
  HyperStep out;
  bool finite = true;
  for (double t : prop) finite = finite && std::abs(t) <= 700.0;
  const double log_ratio = hyper_log_prior_coords(prop, prior) - hyper_log_prior_coords(th, prior);
  out.accept_prob = finite ? std::min(1.0, std::exp(log_ratio)) : 0.0;
  if (uniform01(rng) < out.accept_prob) {
    hyper_from_coords(prop, s.p, s.ggp, s.ccrm);
    for (auto& u : s.log_w0) u += shift;
    for (auto& v : s.log_beta) v -= shift;
    out.accepted = true;
  }
  return out;
}

/// Joint MH move on (hyper, w*): propose hyper by random walk and w* from its
/// conditional given the proposed hyper. The joint acceptance ratio reduces
/// to the collapsed one, so w* is only drawn when the move is accepted.
/// Scales community k: beta_ik -> beta_ik / c for every i and b_k -> c b_k.
/// The gamma law of the scores is invariant; the count likelihood, the
/// collapsed remainder term -alpha psi(2T S) and the prior on b_k change.
/// The ratio is collapsed over w*, which is left stale: the caller redraws it
/// with sample_remainder before anything that reads it.
template <class URBG>
HyperStep community_scale_move(Stage1State& s, const BinaryGraph& Z, double T, std::size_t k, double scale,
                               const HyperPrior& prior, URBG& rng) {
  const double shift = scale * std::normal_distribution<double>()(rng);
  const double c = std::exp(-shift);
  HyperStep out;
  const double b_prop = s.ccrm.b[k] / c;
  if (!(b_prop > 0.0) || !std::isfinite(b_prop) || std::abs(std::log(b_prop)) > 700.0) return out;
  double count = 0.0;
  for (std::size_t e = 0; e < Z.edges.size(); ++e) count += 2.0 * static_cast<double>(s.counts[e * s.p + k]);
  auto colsum = s.column_sums();
  double sq = 0.0;
  for (std::size_t i = 0; i < s.V; ++i) sq += s.weight(i, k) * s.weight(i, k);
  std::vector<double> t(s.p);
  for (std::size_t j = 0; j < s.p; ++j) t[j] = 2.0 * T * colsum[j];
  auto t_prop = t;
  t_prop[k] *= c;
  double log_ratio = -shift * count - T * (colsum[k] * colsum[k] - sq) * (c * c - 1.0) + prior.shape * shift -
                     prior.rate * (b_prop - s.ccrm.b[k]);
  auto c_prop = s.ccrm;
  c_prop.b[k] = b_prop;
  try {
    log_ratio -= s.ggp.alpha * (laplace_exponent(t_prop, s.ggp, c_prop) - laplace_exponent(t, s.ggp, s.ccrm));
  } catch (const numerical_error&) {
    return out;
  }
  out.accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
  if (uniform01(rng) < out.accept_prob) {
    s.ccrm.b[k] = b_prop;
    for (std::size_t i = 0; i < s.V; ++i) s.log_beta[i * s.p + k] -= shift;
    out.accepted = true;
  }
  return out;
}

template <class URBG>
HyperStep mh_update_hyper(Stage1State& s, double T, double scale, std::span<const double> shape,
                          const HyperPrior& prior, double eps, URBG& rng) {
  const auto st = weight_stats(s);
  const auto out = mh_step_hyper(s, st, T, scale, shape, prior, rng);
  if (out.accepted) s.w_rem = sample_remainder(s.ggp, s.ccrm, st.colsum, T, eps, rng);
  return out;
}

/// Joint log-density of (Z, weights, hyper) in the sampler's coordinates
/// (log w0, log beta, hyper_coords), w* excluded. Used for traces and
/// convergence checks. The coordinates matter: w0 -> c w0, beta -> beta / c,
/// tau -> tau / c, b -> c b, alpha -> c^sigma alpha leaves the likelihood and
/// the CRM law unchanged, and only in log coordinates is this density flat
/// along that direction up to the hyper prior.
inline double stage1_log_posterior(const Stage1State& s, const BinaryGraph& Z, double T, const HyperPrior& prior) {
  double lp = graph_loglik(s, Z, T);
  const double V = static_cast<double>(s.V);
  const auto st = weight_stats(s);
  lp += V * std::log(s.ggp.alpha) - s.ggp.sigma * st.sum_log_w0 - s.ggp.tau * st.sum_w0 -
        V * std::lgamma(1.0 - s.ggp.sigma);
  for (std::size_t k = 0; k < s.p; ++k) {
    lp += V * (s.ccrm.a[k] * std::log(s.ccrm.b[k]) - std::lgamma(s.ccrm.a[k])) + s.ccrm.a[k] * st.sum_log_beta[k] -
          s.ccrm.b[k] * st.sum_beta[k];
  }
  return lp + hyper_log_prior_coords(hyper_coords(s.ggp, s.ccrm), prior);
}

// ---------------------------------------------------------------------------
// Chains.

struct Stage1Snapshot {
  std::size_t iteration = 0;
  std::vector<double> w;   // V x p
  std::vector<double> w0;  // V
  std::vector<double> w_rem;
  GgpHyper ggp;
  CcrmHyper ccrm;
  double log_post = 0.0;
};

struct Stage1TraceRow {
  std::size_t iteration = 0;
  double log_post = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  double step = 0.0;
  double hyper_scale = 0.0;
  double hmc_accept = 0.0;    // running mean of HMC acceptance probabilities
  double hyper_accept = 0.0;  // running mean of hyper acceptance probabilities
};

struct Stage1Chain {
  std::vector<Stage1Snapshot> snapshots;
  std::vector<Stage1TraceRow> trace;  // every thin-th iteration, burn-in included
  double hmc_accept = 0.0;            // after burn-in
  double hyper_accept = 0.0;
  double final_step = 0.0;
  double final_hyper_scale = 0.0;
  std::size_t diverged = 0;
  Stage1State final_state;
};

struct Stage1Samples {
  std::size_t V = 0;
  std::size_t p = 0;
  double T = 0.0;
  std::vector<Stage1Chain> chains;
  std::string error;

  bool ok() const { return error.empty(); }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.snapshots.size();
    return n;
  }
};

/// Crude p = 1 start: w_i = deg_i / (2 T S) with S = sqrt(E / T), alpha
/// matched so that alpha psi(2 T S) equals the node count.
template <class URBG>
Stage1State initial_state(const BinaryGraph& Z, double T, double eps, URBG& rng) {
  Stage1State s;
  s.V = Z.node_count;
  s.p = 1;
  const auto deg = Z.degrees();
  const double S = std::sqrt(static_cast<double>(Z.edges.size()) / T);
  s.log_w0.resize(s.V);
  s.log_beta.assign(s.V, 0.0);
  for (std::size_t i = 0; i < s.V; ++i) {
    s.log_w0[i] = std::log(std::max(static_cast<double>(deg[i]), 0.5) / (2.0 * T * S));
  }
  s.ggp = {1.0, 0.0, 1.0};
  s.ccrm = CcrmHyper::uniform(1, 1.0, 1.0);
  const double t = 2.0 * T * S;
  const double psi = laplace_exponent(std::span<const double>(&t, 1), s.ggp, s.ccrm);
  s.ggp.alpha = std::max(static_cast<double>(s.V), 1.0) / psi;
  s.w_rem = sample_remainder(s.ggp, s.ccrm, s.column_sums(), T, eps, rng);
  sample_latent_counts(s, Z, T, rng);
  return s;
}

/// Replicates a p = 1 state across p communities: w_ik = w_i / sqrt(p) times
/// log-normal jitter on beta.
template <class URBG>
Stage1State expand_state(const Stage1State& one, std::size_t p, const BinaryGraph& Z, double T, URBG& rng) {
  if (one.p != 1) throw std::invalid_argument("expand_state: source state must have p = 1");
  Stage1State s;
  s.V = one.V;
  s.p = p;
  s.ggp = one.ggp;
  s.ccrm = CcrmHyper::uniform(p, one.ccrm.a[0], one.ccrm.b[0]);
  s.log_w0.resize(s.V);
  s.log_beta.resize(s.V * p);
  std::normal_distribution<double> jitter(0.0, 0.3);
  const double shift = 0.5 * std::log(static_cast<double>(p));
  for (std::size_t i = 0; i < s.V; ++i) {
    s.log_w0[i] = one.log_w0[i] - shift;
    for (std::size_t k = 0; k < p; ++k) s.log_beta[i * p + k] = one.log_beta[i] + jitter(rng);
  }
  s.w_rem.assign(p, one.w_rem[0] / std::sqrt(static_cast<double>(p)));
  sample_latent_counts(s, Z, T, rng);
  return s;
}

struct ChainSettings {
  std::size_t iterations = 0;
  std::size_t burn = 0;
  std::size_t thin = 1;
  bool record = true;
};

/// Runs one chain from `state`: per iteration an HMC weight move, the hyper
/// MH step with a w* refresh, the rescaling move, then new latent counts.
/// Step sizes adapt by Robbins-Monro during the first half of burn-in only;
/// over the same window the hyper proposal takes its per-coordinate shape
/// from the running sd of the hyper coordinates.
template <class URBG>
Stage1Chain run_stage1_chain(Stage1State state, const BinaryGraph& Z, double T, const Stage1Config& cfg,
                             const ChainSettings& run, URBG& rng) {
  Stage1Chain chain;
  double log_step = std::log(cfg.initial_step);
  double log_scale = std::log(cfg.initial_hyper_scale);
  const std::size_t adapt_until = run.burn / 2;
  const std::size_t shape_from = adapt_until / 2, shape_at = adapt_until * 3 / 4;
  std::size_t scale_from = 0;
  const std::size_t dim = 3 + 2 * state.p;
  std::vector<double> shape, th_mean(dim, 0.0), th_m2(dim, 0.0);
  double hmc_sum = 0.0, hyper_sum = 0.0, hmc_post = 0.0, hyper_post = 0.0;
  std::size_t n_post = 0;
  for (std::size_t it = 0; it < run.iterations; ++it) {
    const double step = std::exp(log_step);
    const double scale = std::exp(log_scale);
    const auto h = hmc_update_weights(state, Z, T, cfg.leapfrog, step, rng);
    if (h.diverged) ++chain.diverged;
    // Every move between here and the redraw is collapsed over w* or leaves
    // it alone, so one draw at the end is enough.
    const auto m = mh_step_hyper(state, weight_stats(state), T, scale, shape, cfg.prior, rng);
    bool stale = m.accepted;
    if (cfg.rescale_scale > 0.0) rescale_move(state, cfg.rescale_scale, cfg.prior, rng);
    if (cfg.community_scale > 0.0) {
      for (std::size_t k = 0; k < state.p; ++k) {
        stale = community_scale_move(state, Z, T, k, cfg.community_scale, cfg.prior, rng).accepted || stale;
      }
    }
    if (stale) state.w_rem = sample_remainder(state.ggp, state.ccrm, state.column_sums(), T, cfg.eps, rng);
    sample_latent_counts(state, Z, T, rng);

    hmc_sum += h.accept_prob;
    hyper_sum += m.accept_prob;
    if (it < adapt_until) {
      // Shapes come from the third quarter of the adaptation window, past the
      // initial transient; the global scale then restarts under that shape.
      log_step += std::pow(static_cast<double>(it) + 1.0, -0.6) * (h.accept_prob - cfg.target_hmc);
      log_scale += std::pow(static_cast<double>(it - scale_from) + 1.0, -0.6) * (m.accept_prob - cfg.target_hyper);
      if (it >= shape_from && it < shape_at) {
        const auto th = hyper_coords(state.ggp, state.ccrm);
        const double n = static_cast<double>(it - shape_from) + 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double d = th[j] - th_mean[j];
          th_mean[j] += d / n;
          th_m2[j] += d * (th[j] - th_mean[j]);
        }
      }
      if (it + 1 == shape_at && shape_at - shape_from >= 50) {
        const double n = static_cast<double>(shape_at - shape_from);
        shape.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) shape[j] = std::sqrt(th_m2[j] / (n - 1.0)) + 1e-3;
        log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
        scale_from = it + 1;
      }
    }
    if (it >= run.burn) {
      hmc_post += h.accept_prob;
      hyper_post += m.accept_prob;
      ++n_post;
    }
    if (!run.record) continue;
    const bool keep_trace = (it + 1) % run.thin == 0;
    const bool keep_snapshot = it >= run.burn && (it - run.burn + 1) % run.thin == 0;
    if (!keep_trace && !keep_snapshot) continue;
    const double lp = stage1_log_posterior(state, Z, T, cfg.prior);
    if (keep_trace) {
      const double n = static_cast<double>(it + 1);
      chain.trace.push_back({it + 1, lp, state.ggp.alpha, state.ggp.sigma, state.ggp.tau, step, scale,
                             hmc_sum / n, hyper_sum / n});
    }
    if (keep_snapshot) {
      Stage1Snapshot snap;
      snap.iteration = it + 1;
      snap.w = state.weights();
      snap.w0.resize(state.V);
      for (std::size_t i = 0; i < state.V; ++i) snap.w0[i] = std::exp(state.log_w0[i]);
      snap.w_rem = state.w_rem;
      snap.ggp = state.ggp;
      snap.ccrm = state.ccrm;
      snap.log_post = lp;
      chain.snapshots.push_back(std::move(snap));
    }
  }
  chain.hmc_accept = n_post ? hmc_post / static_cast<double>(n_post) : 0.0;
  chain.hyper_accept = n_post ? hyper_post / static_cast<double>(n_post) : 0.0;
  chain.final_step = std::exp(log_step);
  chain.final_hyper_scale = std::exp(log_scale);
  chain.final_state = std::move(state);
  return chain;
}

/// Stage 1 on the binary graph Z observed over [0, T]. Chains are independent
/// with RNG streams (seed, chain). For p > 1 each chain starts from a short
/// p = 1 chain whose weights are replicated across communities.
inline Stage1Samples run_stage1(const BinaryGraph& Z, double T, const Stage1Config& cfg) {
  cfg.validate();
  if (Z.edges.empty()) throw std::invalid_argument("run_stage1: graph has no edges");
  if (!(T > 0.0)) throw std::invalid_argument("run_stage1: T must be > 0");
  Stage1Samples out;
  out.V = Z.node_count;
  out.p = cfg.p;
  out.T = T;
  if (cfg.iterations == 0) {
    out.error = "run_stage1: zero iterations requested";
    return out;
  }
  // One thread per chain; each owns its streams, so the result does not
  // depend on scheduling.
  out.chains.resize(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  auto run_chain = [&](std::size_t c) {
    try {
      Rng init_rng = make_stream(cfg.seed, c, kStage1InitSalt);
      Stage1State state = initial_state(Z, T, cfg.eps, init_rng);
      if (!std::isfinite(stage1_log_posterior(state, Z, T, cfg.prior))) {
        throw std::runtime_error("run_stage1: non-finite target at initialization");
      }
      if (cfg.p > 1) {
        const std::size_t n = cfg.init_iters();
        if (n > 0) {
          auto pre = run_stage1_chain(state, Z, T, cfg, {n, n, 1, false}, init_rng);
          state = std::move(pre.final_state);
        }
        state = expand_state(state, cfg.p, Z, T, init_rng);
      }
      Rng rng = make_stream(cfg.seed, c, kStage1Salt);
      out.chains[c] = run_stage1_chain(std::move(state), Z, T, cfg, {cfg.iterations, cfg.burn(), cfg.thin, true}, rng);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  std::vector<std::thread> workers;
  for (std::size_t c = 1; c < cfg.chains; ++c) workers.emplace_back(run_chain, c);
  run_chain(0);
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point estimate.

/// Minimum-cost assignment (Hungarian algorithm, O(n^3)). Returns col[row].
inline std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j) col[match[j] - 1] = j - 1;
  return col;
}

/// Column permutation perm minimizing sum_ik (ref_ik - w_i,perm[k])^2.
/// Exhaustive for p <= 6, assignment solver otherwise.
inline std::vector<std::size_t> align_columns(std::span<const double> w, std::span<const double> ref, std::size_t V,
                                              std::size_t p) {
  std::vector<std::vector<double>> cost(p, std::vector<double>(p, 0.0));
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t l = 0; l < p; ++l) {
      double c = 0.0;
      for (std::size_t i = 0; i < V; ++i) {
        const double d = ref[i * p + k] - w[i * p + l];
        c += d * d;
      }
      cost[k][l] = c;
    }
  }
  if (p > 6) return solve_assignment(cost);
  std::vector<std::size_t> perm(p), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t k = 0; k < p; ++k) c += cost[k][perm[k]];
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct PointEstimate {
  std::size_t V = 0;
  std::size_t p = 0;
  std::vector<double> w_hat;   // V x p
  std::vector<double> w0_hat;  // V
  std::vector<double> w_rem_hat;
  GgpHyper ggp_hat;
  CcrmHyper ccrm_hat;
  std::size_t samples = 0;

  double mu(std::size_t i, std::size_t j) const {
    double m = 0.0;
    for (std::size_t k = 0; k < p; ++k) m += w_hat[i * p + k] * w_hat[j * p + k];
    return m;
  }
};

/// Aligns community columns of every retained sample (two passes: to the
/// first sample, then to the first-pass average), averages, and orders the
/// columns by decreasing total weight.
inline PointEstimate mbr_point_estimate(const Stage1Samples& samples) {
  std::vector<const Stage1Snapshot*> all;
  for (const auto& c : samples.chains) {
    for (const auto& s : c.snapshots) all.push_back(&s);
  }
  if (all.empty()) throw std::invalid_argument("mbr_point_estimate: no retained samples");
  const std::size_t V = samples.V, p = samples.p;
  PointEstimate est;
  est.V = V;
  est.p = p;
  est.samples = all.size();

  std::vector<double> ref = all.front()->w;
  std::vector<std::vector<std::size_t>> perms(all.size());
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> acc(V * p, 0.0);
    for (std::size_t n = 0; n < all.size(); ++n) {
      perms[n] = align_columns(all[n]->w, ref, V, p);
      for (std::size_t i = 0; i < V; ++i) {
        for (std::size_t k = 0; k < p; ++k) acc[i * p + k] += all[n]->w[i * p + perms[n][k]];
      }
    }
    for (auto& x : acc) x /= static_cast<double>(all.size());
    ref = std::move(acc);
  }

  std::vector<double> w0(V, 0.0), rem(p, 0.0), a(p, 0.0), b(p, 0.0);
  double alpha = 0.0, sigma = 0.0, tau = 0.0;
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto& s = *all[n];
    for (std::size_t i = 0; i < V; ++i) w0[i] += s.w0[i];
    for (std::size_t k = 0; k < p; ++k) {
      rem[k] += s.w_rem[perms[n][k]];
      a[k] += s.ccrm.a[perms[n][k]];
      b[k] += s.ccrm.b[perms[n][k]];
    }
    alpha += s.ggp.alpha;
    sigma += s.ggp.sigma;
    tau += s.ggp.tau;
  }
  const double N = static_cast<double>(all.size());

  // Canonical column order makes the estimate invariant to how the inputs
  // were labelled.
  std::vector<double> colsum(p, 0.0);
  for (std::size_t i = 0; i < V; ++i) {
    for (std::size_t k = 0; k < p; ++k) colsum[k] += ref[i * p + k];
  }
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return colsum[x] > colsum[y]; });

  est.w_hat.resize(V * p);
  for (std::size_t i = 0; i < V; ++i) {
    for (std::size_t k = 0; k < p; ++k) est.w_hat[i * p + k] = ref[i * p + order[k]];
  }
  est.w0_hat.resize(V);
  for (std::size_t i = 0; i < V; ++i) est.w0_hat[i] = w0[i] / N;
  est.w_rem_hat.resize(p);
  est.ccrm_hat.a.resize(p);
  est.ccrm_hat.b.resize(p);
  for (std::size_t k = 0; k < p; ++k) {
    est.w_rem_hat[k] = rem[order[k]] / N;
    est.ccrm_hat.a[k] = a[order[k]] / N;
    est.ccrm_hat.b[k] = b[order[k]] / N;
  }
  est.ggp_hat = {alpha / N, sigma / N, tau / N};
  return est;
}

}  // namespace hccrm
