#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hccrm/hawkes_pair.hpp"
#include "hccrm/random_measures.hpp"

namespace hccrm {

using NodeId = std::uint32_t;

struct Interaction {
  double t = 0.0;
  NodeId i = 0;
  NodeId j = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

inline bool interaction_order(const Interaction& x, const Interaction& y) {
  return std::tie(x.t, x.i, x.j) < std::tie(y.t, y.i, y.j);
}

// Timestamped directed interactions on [0, horizon] between node_count nodes.
// Synthetic datasets also carry the ground-truth atom table (including atoms
// that never interacted) and the atom index of each dataset node; parsed
// datasets carry the original node labels.
struct InteractionDataset {
  std::vector<Interaction> interactions;
  double horizon = 1.0;
  std::size_t node_count = 0;
  std::vector<NodeAtom> atoms;
  std::vector<std::size_t> node_atom;
  std::vector<std::string> labels;

  std::size_t size() const { return interactions.size(); }
  bool empty() const { return interactions.empty(); }

  void sort() { std::sort(interactions.begin(), interactions.end(), interaction_order); }

  void validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("InteractionDataset: horizon must be > 0");
    for (std::size_t n = 0; n < interactions.size(); ++n) {
      const auto& x = interactions[n];
      if (x.i == x.j) throw std::invalid_argument("InteractionDataset: self-interaction");
      if (x.i >= node_count || x.j >= node_count) throw std::invalid_argument("InteractionDataset: node id out of range");
      if (!(x.t >= 0.0 && x.t <= horizon)) throw std::invalid_argument("InteractionDataset: time outside [0, T]");
      if (n > 0 && interaction_order(x, interactions[n - 1])) {
        throw std::invalid_argument("InteractionDataset: interactions not sorted by (t, i, j)");
      }
    }
  }
};

// Undirected edge {i, j} with i < j.
using Edge = std::pair<NodeId, NodeId>;

inline Edge make_edge(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

struct EdgeHash {
  std::size_t operator()(const Edge& e) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(e.first) << 32) | e.second);
  }
};

struct BinaryGraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;  // sorted, unique, first < second

  std::vector<std::vector<NodeId>> adjacency() const {
    std::vector<std::vector<NodeId>> adj(node_count);
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    return adj;
  }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(node_count, 0);
    for (const auto& [a, b] : edges) {
      ++deg[a];
      ++deg[b];
    }
    return deg;
  }
};

/// z_ij = 1 iff at least one interaction in either direction.
inline BinaryGraph binary_projection(const InteractionDataset& d) {
  BinaryGraph g;
  g.node_count = d.node_count;
  g.edges.reserve(d.interactions.size());
  for (const auto& x : d.interactions) g.edges.push_back(make_edge(x.i, x.j));
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

/// Histogram degree -> number of nodes.
inline std::map<std::size_t, std::size_t> degree_distribution(const BinaryGraph& g) {
  std::map<std::size_t, std::size_t> hist;
  for (auto deg : g.degrees()) ++hist[deg];
  return hist;
}

// Both directions of one unordered pair; forward is first -> second.
struct PairRecord {
  Edge pair;
  PairHistory history;
};

/// Groups interactions by unordered pair. Pairs are returned in edge order.
inline std::vector<PairRecord> pair_histories(const InteractionDataset& d, double horizon) {
  std::unordered_map<Edge, std::pair<std::vector<double>, std::vector<double>>, EdgeHash> buckets;
  for (const auto& x : d.interactions) {
    const Edge e = make_edge(x.i, x.j);
    auto& slot = buckets[e];
    (x.i == e.first ? slot.first : slot.second).push_back(x.t);
  }
  std::vector<Edge> keys;
  keys.reserve(buckets.size());
  for (const auto& kv : buckets) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  std::vector<PairRecord> out;
  out.reserve(keys.size());
  for (const auto& e : keys) {
    auto& slot = buckets[e];
    out.push_back({e, PairHistory(std::move(slot.first), std::move(slot.second), horizon)});
  }
  return out;
}

inline std::vector<PairRecord> pair_histories(const InteractionDataset& d) { return pair_histories(d, d.horizon); }

/// Interaction count per directed pair.
inline std::map<std::pair<NodeId, NodeId>, std::size_t> directed_counts(const InteractionDataset& d) {
  std::map<std::pair<NodeId, NodeId>, std::size_t> counts;
  for (const auto& x : d.interactions) ++counts[{x.i, x.j}];
  return counts;
}

}  // namespace hccrm
