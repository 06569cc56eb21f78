#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "hccrm/dataset.hpp"
#include "hccrm/diagnostics.hpp"
#include "hccrm/hawkes_pair.hpp"
#include "hccrm/random.hpp"

namespace hccrm {

// Stage 2: MH sampling of the reciprocity kernel (eta, delta) given fixed base
// rates mu_hat and the timestamped pair histories.

inline constexpr std::uint64_t kStage2Salt = 21;

struct Stage2Config {
  double prior_rate_eta = 0.01;
  double prior_rate_delta = 0.01;
  double proposal_eta = 1.5;    // variance unless proposal_is_sd
  double proposal_delta = 2.5;
  bool proposal_is_sd = false;
  std::size_t iterations = 10000;
  std::size_t burn_in = std::numeric_limits<std::size_t>::max();  // default: half
  std::size_t thin = 1;
  std::size_t chains = 2;
  bool adapt = true;  // Robbins-Monro on the proposal sds over the first half of burn-in
  double target_accept = 0.44;
  bool joint_proposal = false;  // one joint (eta, delta) move instead of eta then delta
  // Every pair with at least one event contributes both directions (a silent
  // direction still carries -Lambda(T)). False keeps only directed pairs with
  // events.
  bool include_silent_directions = true;
  // One common base rate for every pair, sampled as an extra coordinate.
  bool shared_mu = false;
  double prior_rate_mu = 0.01;
  double initial_mu_scale = 0.1;  // random-walk sd on log mu
  double mu_floor = 1e-10;
  KernelParams init{0.5, 1.0};
  std::uint64_t seed = 1;

  std::size_t burn() const { return burn_in == std::numeric_limits<std::size_t>::max() ? iterations / 2 : burn_in; }
  double sd_eta() const { return proposal_is_sd ? proposal_eta : std::sqrt(proposal_eta); }
  double sd_delta() const { return proposal_is_sd ? proposal_delta : std::sqrt(proposal_delta); }

  void validate() const {
    if (!(prior_rate_eta > 0.0) || !(prior_rate_delta > 0.0) || !(prior_rate_mu > 0.0)) {
      throw std::invalid_argument("Stage2Config: prior rates must be > 0");
    }
    if (!(proposal_eta >= 0.0) || !(proposal_delta >= 0.0)) throw std::invalid_argument("Stage2Config: negative proposal scale");
    if (thin == 0 || chains == 0) throw std::invalid_argument("Stage2Config: thin and chains must be >= 1");
    if (burn() > iterations) throw std::invalid_argument("Stage2Config: burn-in exceeds iterations");
    if (!(mu_floor > 0.0)) throw std::invalid_argument("Stage2Config: mu_floor must be > 0");
    init.validate();
    if (!(init.delta > 0.0)) throw std::invalid_argument("Stage2Config: initial delta must be > 0");
  }
};

struct Stage2Pair {
  Edge pair;
  PairHistory history;
  PairRate rate;
  DirectionMask mask;
};

struct Stage2Data {
  std::vector<Stage2Pair> pairs;
  double T = 0.0;
  std::size_t events = 0;
  std::size_t directions = 0;  // directed pairs that contribute
};

/// Builds stage-2 inputs from pair histories; mu(i, j) is the base rate of
/// i -> j, floored at cfg.mu_floor.
inline Stage2Data make_stage2_data(const std::vector<PairRecord>& records, double T,
                                   const std::function<double(NodeId, NodeId)>& mu, const Stage2Config& cfg) {
  Stage2Data d;
  d.T = T;
  for (const auto& r : records) {
    if (r.history.size() == 0) continue;
    if (r.history.horizon() != T) throw std::invalid_argument("make_stage2_data: history horizon differs from T");
    Stage2Pair p{r.pair, r.history, {}, {}};
    p.rate.mu_ij = std::max(mu(r.pair.first, r.pair.second), cfg.mu_floor);
    p.rate.mu_ji = std::max(mu(r.pair.second, r.pair.first), cfg.mu_floor);
    if (!cfg.include_silent_directions) {
      p.mask.forward = !r.history.forward().empty();
      p.mask.backward = !r.history.backward().empty();
    }
    d.events += r.history.size();
    d.directions += (p.mask.forward ? 1 : 0) + (p.mask.backward ? 1 : 0);
    d.pairs.push_back(std::move(p));
  }
  return d;
}

/// Excitation terms of every pair at one delta.
inline void stage2_terms(const Stage2Data& d, double delta, std::vector<ExcitationTerms>& out) {
  out.resize(d.pairs.size());
  for (std::size_t n = 0; n < d.pairs.size(); ++n) excitation_terms(d.pairs[n].history, delta, out[n]);
}

/// Data log-likelihood from cached terms. shared_mu > 0 replaces every base rate.
inline double stage2_loglik(const Stage2Data& d, const std::vector<ExcitationTerms>& terms, const KernelParams& k,
                            double shared_mu = 0.0) {
  double ll = 0.0;
  for (std::size_t n = 0; n < d.pairs.size(); ++n) {
    const auto& p = d.pairs[n];
    const PairRate rate = shared_mu > 0.0 ? PairRate::symmetric(shared_mu) : p.rate;
    ll += loglik_from_terms(p.history, terms[n], rate, k, p.mask);
    if (ll == -std::numeric_limits<double>::infinity()) return ll;
  }
  return ll;
}

inline double stage2_log_prior(const KernelParams& k, const Stage2Config& cfg) {
  if (!(k.eta >= 0.0) || !(k.delta > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(cfg.prior_rate_eta) - cfg.prior_rate_eta * k.eta + std::log(cfg.prior_rate_delta) -
         cfg.prior_rate_delta * k.delta;
}

/// Unnormalized log posterior of phi = (eta, delta) given the base rates.
inline double stage2_logpost(const KernelParams& k, const Stage2Data& d, const Stage2Config& cfg) {
  const double lp = stage2_log_prior(k, cfg);
  if (!std::isfinite(lp)) return lp;
  std::vector<ExcitationTerms> terms;
  stage2_terms(d, k.delta, terms);
  return lp + stage2_loglik(d, terms, k);
}

/// Draw from N(x, sd^2) truncated to (0, infinity), x >= 0.
template <class URBG>
double truncated_normal_positive(URBG& rng, double x, double sd) {
  if (sd == 0.0) return x;
  if (!(x >= 0.0)) throw std::invalid_argument("truncated_normal_positive: x must be >= 0");
  std::normal_distribution<double> normal(x, sd);
  for (;;) {
    const double y = normal(rng);
    if (y > 0.0) return y;
  }
}

/// log q(current | proposed) - log q(proposed | current) for the positive
/// truncated normal proposal, i.e. log Phi(current / sd) - log Phi(proposed / sd).
inline double truncated_normal_correction(double current, double proposed, double sd) {
  if (sd == 0.0) return 0.0;
  const boost::math::normal_distribution<double> n01;
  return std::log(boost::math::cdf(n01, current / sd)) - std::log(boost::math::cdf(n01, proposed / sd));
}

struct MhResult {
  double accept_prob = 0.0;
  bool accepted = false;
};

/// One MH update of a positive coordinate x with a truncated-normal proposal.
/// `current` is the log target at x; log_target(y) evaluates a proposal. On
/// acceptance x and current are overwritten.
template <class F, class URBG>
MhResult truncated_normal_mh(double& x, double& current, double sd, F&& log_target, URBG& rng) {
  MhResult r;
  if (sd == 0.0) {
    r.accept_prob = 1.0;
    r.accepted = true;
    return r;
  }
  const double y = truncated_normal_positive(rng, x, sd);
  const double proposed = log_target(y);
  const double lr = proposed - current + truncated_normal_correction(x, y, sd);
  r.accept_prob = std::isfinite(lr) ? std::min(1.0, std::exp(lr)) : (lr > 0.0 ? 1.0 : 0.0);
  if (uniform01(rng) < r.accept_prob) {
    x = y;
    current = proposed;
    r.accepted = true;
  }
  return r;
}

struct Stage2Draw {
  std::size_t iteration = 0;
  double eta = 0.0;
  double delta = 0.0;
  double mu = 0.0;  // shared base rate; 0 when per-pair rates are used
  double log_post = 0.0;
};

struct Stage2Chain {
  std::vector<Stage2Draw> draws;  // after burn-in, thinned
  std::vector<Stage2Draw> trace;  // every thin-th iteration, burn-in included
  double accept_eta = 0.0;        // after burn-in
  double accept_delta = 0.0;
  double accept_mu = 0.0;
  double final_sd_eta = 0.0;
  double final_sd_delta = 0.0;
  double final_sd_mu = 0.0;
};

struct ParamSummary {
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double rhat = 1.0;
};

struct Stage2Summary {
  ParamSummary eta;
  ParamSummary delta;
  ParamSummary mu;
  double accept_eta = 0.0;
  double accept_delta = 0.0;
  double nonstationary_mass = 0.0;  // posterior mass of eta >= delta
  std::size_t draws = 0;
};

struct Stage2Samples {
  std::vector<Stage2Chain> chains;
  bool shared_mu = false;

  std::vector<Stage2Draw> pooled() const {
    std::vector<Stage2Draw> all;
    for (const auto& c : chains) all.insert(all.end(), c.draws.begin(), c.draws.end());
    return all;
  }

  Stage2Summary summary() const {
    Stage2Summary s;
    const auto all = pooled();
    s.draws = all.size();
    if (all.empty()) return s;
    auto summarize_param = [&](auto get) {
      ParamSummary p;
      std::vector<double> xs;
      for (const auto& d : all) xs.push_back(get(d));
      p.mean = mean_of(xs);
      p.q025 = quantile_of(xs, 0.025);
      p.q975 = quantile_of(xs, 0.975);
      std::vector<std::vector<double>> per_chain;
      for (const auto& c : chains) {
        per_chain.emplace_back();
        for (const auto& d : c.draws) per_chain.back().push_back(get(d));
      }
      const bool rhat_ok = per_chain.size() >= 2 && per_chain.front().size() >= 2 &&
                           std::all_of(per_chain.begin(), per_chain.end(),
                                       [&](const auto& v) { return v.size() == per_chain.front().size(); });
      p.rhat = rhat_ok ? gelman_rubin(per_chain) : std::numeric_limits<double>::quiet_NaN();
      return p;
    };
    s.eta = summarize_param([](const Stage2Draw& d) { return d.eta; });
    s.delta = summarize_param([](const Stage2Draw& d) { return d.delta; });
    if (shared_mu) s.mu = summarize_param([](const Stage2Draw& d) { return d.mu; });
    double ns = 0.0;
    for (const auto& d : all) ns += d.eta >= d.delta ? 1.0 : 0.0;
    s.nonstationary_mass = ns / static_cast<double>(all.size());
    for (const auto& c : chains) {
      s.accept_eta += c.accept_eta / static_cast<double>(chains.size());
      s.accept_delta += c.accept_delta / static_cast<double>(chains.size());
    }
    return s;
  }
};

/// One chain of alternating truncated-normal MH updates (eta, then delta; or
/// jointly), plus a log-scale random walk on the shared rate when enabled.
template <class URBG>
Stage2Chain run_stage2_chain(const Stage2Data& d, const Stage2Config& cfg, KernelParams phi, double mu, URBG& rng) {
  Stage2Chain chain;
  double log_sd[3] = {std::log(cfg.sd_eta()), std::log(cfg.sd_delta()), std::log(cfg.initial_mu_scale)};
  const bool zero_eta = cfg.sd_eta() == 0.0, zero_delta = cfg.sd_delta() == 0.0;
  const std::size_t burn = cfg.burn(), adapt_until = cfg.adapt ? burn / 2 : 0;
  std::vector<ExcitationTerms> terms, scratch;
  stage2_terms(d, phi.delta, terms);
  auto data_ll = [&](const std::vector<ExcitationTerms>& t, const KernelParams& k, double m) {
    return stage2_loglik(d, t, k, cfg.shared_mu ? m : 0.0);
  };
  auto mu_prior = [&](double m) { return cfg.shared_mu ? std::log(m) - cfg.prior_rate_mu * m : 0.0; };
  double ll = data_ll(terms, phi, mu);
  double acc[3] = {0.0, 0.0, 0.0};
  std::size_t n_post = 0;
  auto sd = [&](int j) { return (j == 0 && zero_eta) || (j == 1 && zero_delta) ? 0.0 : std::exp(log_sd[j]); };
  auto accept = [&](double log_ratio) {
    const double a = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : (log_ratio > 0 ? 1.0 : 0.0);
    return std::pair{a, uniform01(rng) < a};
  };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    double a_eta = 0.0, a_delta = 0.0, a_mu = 0.0;
    if (cfg.joint_proposal) {
      const KernelParams prop{truncated_normal_positive(rng, phi.eta, sd(0)),
                              truncated_normal_positive(rng, phi.delta, sd(1))};
      stage2_terms(d, prop.delta, scratch);
      const double ll_prop = data_ll(scratch, prop, mu);
      const double lr = ll_prop + stage2_log_prior(prop, cfg) - ll - stage2_log_prior(phi, cfg) +
                        truncated_normal_correction(phi.eta, prop.eta, sd(0)) +
                        truncated_normal_correction(phi.delta, prop.delta, sd(1));
      const auto [a, ok] = accept(lr);
      a_eta = a_delta = a;
      if (ok) {
        phi = prop;
        ll = ll_prop;
        std::swap(terms, scratch);
      }
    } else {
      // Targets here carry the data part and the prior terms that vary.
      double cur = ll - cfg.prior_rate_eta * phi.eta;
      const auto re = truncated_normal_mh(
          phi.eta, cur, sd(0),
          [&](double y) { return data_ll(terms, {y, phi.delta}, mu) - cfg.prior_rate_eta * y; }, rng);
      a_eta = re.accept_prob;
      ll = cur + cfg.prior_rate_eta * phi.eta;

      cur = ll - cfg.prior_rate_delta * phi.delta;
      const auto rd = truncated_normal_mh(
          phi.delta, cur, sd(1),
          [&](double y) {
            stage2_terms(d, y, scratch);
            return data_ll(scratch, {phi.eta, y}, mu) - cfg.prior_rate_delta * y;
          },
          rng);
      a_delta = rd.accept_prob;
      if (rd.accepted && sd(1) > 0.0) std::swap(terms, scratch);
      ll = cur + cfg.prior_rate_delta * phi.delta;
    }
    if (cfg.shared_mu) {
      const double prop = mu * std::exp(std::exp(log_sd[2]) * std::normal_distribution<double>()(rng));
      const double ll_prop = data_ll(terms, phi, prop);
      const auto [a, ok] = accept(ll_prop + mu_prior(prop) - ll - mu_prior(mu));
      a_mu = a;
      if (ok) {
        mu = prop;
        ll = ll_prop;
      }
    }
    if (it < adapt_until) {
      const double gain = std::pow(static_cast<double>(it) + 1.0, -0.6);
      log_sd[0] += gain * (a_eta - cfg.target_accept);
      log_sd[1] += gain * (a_delta - cfg.target_accept);
      log_sd[2] += gain * (a_mu - cfg.target_accept);
    }
    if (it >= burn) {
      acc[0] += a_eta;
      acc[1] += a_delta;
      acc[2] += a_mu;
      ++n_post;
    }
    const bool keep_trace = (it + 1) % cfg.thin == 0;
    const bool keep_draw = it >= burn && (it - burn + 1) % cfg.thin == 0;
    if (keep_trace || keep_draw) {
      const Stage2Draw draw{it + 1, phi.eta, phi.delta, cfg.shared_mu ? mu : 0.0,
                            ll + stage2_log_prior(phi, cfg) + mu_prior(mu)};
      if (keep_trace) chain.trace.push_back(draw);
      if (keep_draw) chain.draws.push_back(draw);
    }
  }
  const double n = n_post ? static_cast<double>(n_post) : 1.0;
  chain.accept_eta = acc[0] / n;
  chain.accept_delta = acc[1] / n;
  chain.accept_mu = acc[2] / n;
  chain.final_sd_eta = sd(0);
  chain.final_sd_delta = sd(1);
  chain.final_sd_mu = std::exp(log_sd[2]);
  return chain;
}

/// Stage 2 over independent chains with RNG streams (seed, chain). Chain 0
/// starts at cfg.init; later chains start from a log-normal jitter of it.
/// With shared_mu the rate starts at events / (directions * T).
inline Stage2Samples run_stage2(const Stage2Data& d, const Stage2Config& cfg) {
  cfg.validate();
  Stage2Samples out;
  out.shared_mu = cfg.shared_mu;
  const double mu0 = d.directions > 0 && d.events > 0
                         ? static_cast<double>(d.events) / (static_cast<double>(d.directions) * d.T)
                         : 1.0;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    Rng rng = make_stream(cfg.seed, c, kStage2Salt);
    KernelParams phi = cfg.init;
    if (c > 0) {
      std::normal_distribution<double> jitter(0.0, 0.5);
      phi.eta = cfg.init.eta * std::exp(jitter(rng));
      phi.delta = cfg.init.delta * std::exp(jitter(rng));
    }
    out.chains.push_back(run_stage2_chain(d, cfg, phi, mu0, rng));
  }
  return out;
}

}  // namespace hccrm
