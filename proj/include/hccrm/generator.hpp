#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hccrm/dataset.hpp"
#include "hccrm/hawkes_pair.hpp"
#include "hccrm/random.hpp"
#include "hccrm/random_measures.hpp"

namespace hccrm {

inline constexpr double kDefaultSamplingEps = 1e-3;

// Stream salts for the generator's seed-splitting rule. Atoms come from
// stream (seed, 0, kAtomSalt); unordered pair number q (row-major over i < j
// in label order) uses hash (seed, q, kFirstArrivalSalt) for its first-arrival
// uniform and generator (seed, q, kPairSalt) for everything after.
inline constexpr std::uint64_t kAtomSalt = 1;
inline constexpr std::uint64_t kFirstArrivalSalt = 2;
inline constexpr std::uint64_t kPairSalt = 3;

struct GeneratorOptions {
  double eps = kDefaultSamplingEps;
  bool allow_nonstationary = false;
  // Pairs with 2 mu T below this are skipped without drawing.
  double skip_threshold = 1e-14;
};

inline double pair_rate(std::span<const double> wi, std::span<const double> wj) {
  double mu = 0.0;
  for (std::size_t k = 0; k < wi.size(); ++k) mu += wi[k] * wj[k];
  return mu;
}

/// Simulates interactions among a fixed atom table (label order). Each pair's
/// first event is drawn exactly from Exponential(2 mu_ij); only pairs whose
/// first event falls in [0, T] are continued with Ogata thinning.
inline InteractionDataset generate_from_atoms(std::vector<NodeAtom> atoms, const KernelParams& k, double T,
                                              std::uint64_t seed, const GeneratorOptions& opt = {}) {
  k.validate();
  if (!(T > 0.0)) throw std::invalid_argument("generate: T must be > 0");
  if (!k.stationary() && !opt.allow_nonstationary) throw std::invalid_argument("generate: eta >= delta (non-stationary)");

  std::vector<Interaction> raw;  // node fields hold atom indices for now
  const std::size_t n = atoms.size();
  std::uint64_t q = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++q) {
      const double mu = pair_rate(atoms[i].w, atoms[j].w);
      if (2.0 * mu * T < opt.skip_threshold) continue;
      const double u = open_unit(stream_seed(seed, q, kFirstArrivalSalt));
      const double first = -std::log(u) / (2.0 * mu);
      if (first > T) continue;
      Rng rng = make_stream(seed, q, kPairSalt);
      const auto a = static_cast<NodeId>(i);
      const auto b = static_cast<NodeId>(j);
      PairExcitation x;
      if (uniform01(rng) < 0.5) {
        raw.push_back({first, a, b});
        x.on_backward = 1.0;
      } else {
        raw.push_back({first, b, a});
        x.on_forward = 1.0;
      }
      simulate_pair_window(PairRate::symmetric(mu), k, first, T, x, rng, [&](double t, Direction d) {
        raw.push_back(d == Direction::forward ? Interaction{t, a, b} : Interaction{t, b, a});
      });
    }
  }

  InteractionDataset out;
  out.horizon = T;
  std::vector<std::int64_t> dense(n, -1);
  for (const auto& x : raw) dense[x.i] = dense[x.j] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dense[i] == 0) {
      dense[i] = static_cast<std::int64_t>(out.node_atom.size());
      out.node_atom.push_back(i);
    }
  }
  out.node_count = out.node_atom.size();
  out.interactions.reserve(raw.size());
  for (const auto& x : raw) {
    out.interactions.push_back({x.t, static_cast<NodeId>(dense[x.i]), static_cast<NodeId>(dense[x.j])});
  }
  out.sort();
  out.atoms = std::move(atoms);
  return out;
}

/// Full generative model: GGP atoms, gamma community scores, and
/// mutually-exciting Hawkes pairs with base rate mu_ij = sum_k w_ik w_jk.
inline InteractionDataset generate(const GgpHyper& h, const CcrmHyper& c, const KernelParams& k, double T,
                                   std::uint64_t seed, const GeneratorOptions& opt = {}) {
  h.validate();
  c.validate();
  k.validate();
  Rng rng = make_stream(seed, 0, kAtomSalt);
  const auto ggp = sample_ggp(h, opt.eps, rng);
  auto atoms = sample_ccrm(ggp, c, rng);
  return generate_from_atoms(std::move(atoms), k, T, seed, opt);
}

// Counts used by the moment checks: interactions I, edges E, active nodes V.
struct NetworkCounts {
  double interactions = 0.0;
  double edges = 0.0;
  double nodes = 0.0;
};

inline NetworkCounts network_counts(const InteractionDataset& d) {
  const auto g = binary_projection(d);
  return {static_cast<double>(d.size()), static_cast<double>(g.edges.size()), static_cast<double>(d.node_count)};
}

}  // namespace hccrm
