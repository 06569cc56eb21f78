#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hccrm/random.hpp"

namespace hccrm {

// Exponential reciprocity kernel g(t) = eta e^(-delta t).
struct KernelParams {
  double eta = 0.0;
  double delta = 1.0;

  bool stationary() const { return eta < delta; }

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("KernelParams: eta must be >= 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("KernelParams: delta must be > 0");
  }
};

// Base rates of the two directions of a pair.
struct PairRate {
  double mu_ij = 0.0;
  double mu_ji = 0.0;

  static PairRate symmetric(double mu) { return {mu, mu}; }
};

enum class Direction : unsigned char { forward = 0, backward = 1 };

inline Direction opposite(Direction d) {
  return d == Direction::forward ? Direction::backward : Direction::forward;
}

struct TaggedEvent {
  double t;
  Direction dir;
};

// Event history of one unordered pair: forward holds the i->j times, backward
// the j->i times. Immutable once built. The merged view orders equal
// timestamps forward before backward. Repeated timestamps within a direction
// (multi-recipient rows in real data) are accepted; events sharing a
// timestamp never excite each other.
class PairHistory {
 public:
  PairHistory() = default;

  PairHistory(std::vector<double> forward, std::vector<double> backward, double horizon)
      : forward_(std::move(forward)), backward_(std::move(backward)), horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw std::invalid_argument("PairHistory: horizon must be > 0");
    check_times(forward_, "forward");
    check_times(backward_, "backward");
    merged_.reserve(forward_.size() + backward_.size());
    std::size_t f = 0, b = 0;
    while (f < forward_.size() || b < backward_.size()) {
      if (b == backward_.size() || (f < forward_.size() && forward_[f] <= backward_[b])) {
        merged_.push_back({forward_[f++], Direction::forward});
      } else {
        merged_.push_back({backward_[b++], Direction::backward});
      }
    }
  }

  const std::vector<double>& forward() const { return forward_; }
  const std::vector<double>& backward() const { return backward_; }
  const std::vector<double>& times(Direction d) const { return d == Direction::forward ? forward_ : backward_; }
  const std::vector<TaggedEvent>& merged() const { return merged_; }
  double horizon() const { return horizon_; }
  std::size_t size() const { return merged_.size(); }

 private:
  void check_times(const std::vector<double>& ts, const char* label) const {
    for (std::size_t n = 0; n < ts.size(); ++n) {
      if (!(ts[n] >= 0.0 && ts[n] <= horizon_)) {
        throw std::invalid_argument(std::string("PairHistory: ") + label + " time outside [0, T]");
      }
      if (n > 0 && ts[n] < ts[n - 1]) {
        throw std::invalid_argument(std::string("PairHistory: ") + label + " times not sorted");
      }
    }
  }

  std::vector<double> forward_;
  std::vector<double> backward_;
  std::vector<TaggedEvent> merged_;
  double horizon_ = 1.0;
};

inline double rate_of(const PairRate& r, Direction d) { return d == Direction::forward ? r.mu_ij : r.mu_ji; }

/// lambda(t) = mu + eta * sum over opposite events u < t of e^(-delta (t - u)).
inline double intensity_at(double t, const PairHistory& h, Direction dir, double mu, const KernelParams& k) {
  if (!(t >= 0.0 && t <= h.horizon())) throw std::invalid_argument("intensity_at: t outside [0, T]");
  const auto& opp = h.times(opposite(dir));
  const auto end = std::lower_bound(opp.begin(), opp.end(), t);
  double excitation = 0.0;
  for (auto it = opp.begin(); it != end; ++it) excitation += std::exp(-k.delta * (t - *it));
  return mu + k.eta * excitation;
}

/// Lambda(t) = t mu + (eta/delta) * sum over opposite u < t of (1 - e^(-delta (t - u))).
inline double compensator(const PairHistory& h, Direction dir, double mu, const KernelParams& k, double t) {
  if (!(t >= 0.0 && t <= h.horizon())) throw std::invalid_argument("compensator: t outside [0, T]");
  const auto& opp = h.times(opposite(dir));
  const auto end = std::lower_bound(opp.begin(), opp.end(), t);
  double mass = 0.0;
  for (auto it = opp.begin(); it != end; ++it) mass += -std::expm1(-k.delta * (t - *it));
  return t * mu + k.eta / k.delta * mass;
}

// delta-dependent pieces of the pair likelihood, computed in one sweep:
// s[e] is the decayed sum of strictly earlier opposite events at merged
// event e, and kernel_mass[d] is sum over opposite events of (1 - e^(-delta (T - u)))
// for direction d. With these, log L = sum_e log(mu_d + eta s[e]) - sum_d (mu_d T + eta/delta kernel_mass[d]).
struct ExcitationTerms {
  std::vector<double> s;
  double kernel_mass[2] = {0.0, 0.0};
};

inline void excitation_terms(const PairHistory& h, double delta, ExcitationTerms& out) {
  const auto& events = h.merged();
  out.s.resize(events.size());
  double on_forward = 0.0;   // decayed count of backward events, excites forward
  double on_backward = 0.0;  // decayed count of forward events, excites backward
  double last = 0.0;
  std::size_t n_forward = 0;
  std::size_t n_backward = 0;
  std::size_t e = 0;
  while (e < events.size()) {
    const double t = events[e].t;
    const double decay = std::exp(-delta * (t - last));
    on_forward *= decay;
    on_backward *= decay;
    last = t;
    std::size_t group_end = e;
    while (group_end < events.size() && events[group_end].t == t) {
      out.s[group_end] = events[group_end].dir == Direction::forward ? on_forward : on_backward;
      ++group_end;
    }
    // Events at the same timestamp do not excite each other.
    for (; e < group_end; ++e) {
      if (events[e].dir == Direction::forward) {
        on_backward += 1.0;
        ++n_forward;
      } else {
        on_forward += 1.0;
        ++n_backward;
      }
    }
  }
  const double decay = std::exp(-delta * (h.horizon() - last));
  on_forward *= decay;
  on_backward *= decay;
  out.kernel_mass[static_cast<int>(Direction::forward)] = static_cast<double>(n_backward) - on_forward;
  out.kernel_mass[static_cast<int>(Direction::backward)] = static_cast<double>(n_forward) - on_backward;
}

inline ExcitationTerms excitation_terms(const PairHistory& h, double delta) {
  ExcitationTerms out;
  excitation_terms(h, delta, out);
  return out;
}

struct DirectionMask {
  bool forward = true;
  bool backward = true;
  bool operator[](Direction d) const { return d == Direction::forward ? forward : backward; }
};

/// Log-likelihood from precomputed excitation terms. Returns -infinity when an
/// owned event has zero intensity.
inline double loglik_from_terms(const PairHistory& h, const ExcitationTerms& terms, const PairRate& rates,
                                const KernelParams& k, DirectionMask mask = {}) {
  // Neumaier summation: long histories add 10^4+ logs of mixed sign.
  double ll = 0.0, carry = 0.0;
  auto add = [&](double x) {
    const double t = ll + x;
    carry += std::abs(ll) >= std::abs(x) ? (ll - t) + x : (x - t) + ll;
    ll = t;
  };
  const auto& events = h.merged();
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (!mask[events[e].dir]) continue;
    const double lambda = rate_of(rates, events[e].dir) + k.eta * terms.s[e];
    if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
    add(std::log(lambda));
  }
  for (Direction d : {Direction::forward, Direction::backward}) {
    if (!mask[d]) continue;
    add(-(rate_of(rates, d) * h.horizon() + k.eta / k.delta * terms.kernel_mass[static_cast<int>(d)]));
  }
  return ll + carry;
}

/// Log-likelihood of both directions of the pair on [0, T], O(n) via the
/// excitation recursion.
inline double loglik_pair(const PairHistory& h, const PairRate& rates, const KernelParams& k) {
  k.validate();
  return loglik_from_terms(h, excitation_terms(h, k.delta), rates, k);
}

// Unscaled excitation carried into a simulation window: on_forward is the
// decayed count of past backward events (excites i->j), on_backward likewise.
struct PairExcitation {
  double on_forward = 0.0;
  double on_backward = 0.0;
};

/// Excitation state at time t (just after t) from a history's events <= t.
inline PairExcitation excitation_at(const PairHistory& h, double delta, double t) {
  PairExcitation x;
  for (double u : h.backward()) {
    if (u > t) break;
    x.on_forward += std::exp(-delta * (t - u));
  }
  for (double u : h.forward()) {
    if (u > t) break;
    x.on_backward += std::exp(-delta * (t - u));
  }
  return x;
}

/// Ogata thinning on (start, end] from the given excitation state. Calls
/// emit(t, direction) for each event.
template <class URBG, class Emit>
void simulate_pair_window(const PairRate& rates, const KernelParams& k, double start, double end,
                          PairExcitation x, URBG& rng, Emit&& emit) {
  double t = start;
  for (;;) {
    const double bound = rates.mu_ij + rates.mu_ji + k.eta * (x.on_forward + x.on_backward);
    if (!(bound > 0.0)) return;
    const double wait = exponential(rng, bound);
    t += wait;
    if (t > end) return;
    const double decay = std::exp(-k.delta * wait);
    x.on_forward *= decay;
    x.on_backward *= decay;
    const double lambda_f = rates.mu_ij + k.eta * x.on_forward;
    const double lambda_b = rates.mu_ji + k.eta * x.on_backward;
    const double u = uniform01(rng) * bound;
    if (u < lambda_f) {
      emit(t, Direction::forward);
      x.on_backward += 1.0;
    } else if (u < lambda_f + lambda_b) {
      emit(t, Direction::backward);
      x.on_forward += 1.0;
    }
  }
}

/// Exact sample of a mutually-exciting pair on [0, T]. Non-stationary kernels
/// are refused unless allow_nonstationary is set.
template <class URBG>
PairHistory simulate_pair(const PairRate& rates, const KernelParams& k, double T, URBG& rng,
                          bool allow_nonstationary = false) {
  k.validate();
  if (!(T > 0.0)) throw std::invalid_argument("simulate_pair: T must be > 0");
  if (!(rates.mu_ij >= 0.0) || !(rates.mu_ji >= 0.0)) throw std::invalid_argument("simulate_pair: negative rate");
  if (!k.stationary() && !allow_nonstationary) {
    throw std::invalid_argument("simulate_pair: eta >= delta (non-stationary)");
  }
  std::vector<double> forward, backward;
  simulate_pair_window(rates, k, 0.0, T, PairExcitation{}, rng, [&](double t, Direction d) {
    (d == Direction::forward ? forward : backward).push_back(t);
  });
  return PairHistory(std::move(forward), std::move(backward), T);
}

/// Expected number of events in one direction of a symmetric pair on [0, T],
/// mu (delta/(delta-eta) T - eta/(delta-eta)^2 (1 - e^(-T (delta-eta)))).
inline double expected_count(double mu, const KernelParams& k, double T) {
  k.validate();
  if (!k.stationary()) throw std::invalid_argument("expected_count: eta >= delta (non-stationary)");
  if (T < 0.0) throw std::invalid_argument("expected_count: T must be >= 0");
  const double gap = k.delta - k.eta;
  return mu * (k.delta / gap * T + k.eta / (gap * gap) * std::expm1(-T * gap));
}

}  // namespace hccrm
