#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hccrm/dataset.hpp"
#include "hccrm/diagnostics.hpp"
#include "hccrm/generator.hpp"
#include "hccrm/hawkes_pair.hpp"
#include "hccrm/inference_graph.hpp"
#include "hccrm/inference_kernel.hpp"
#include "hccrm/random.hpp"

namespace hccrm {

inline constexpr std::uint64_t kForecastSalt = 31;
inline constexpr std::uint64_t kDegreeSalt = 41;

// ---------------------------------------------------------------- split

struct SplitDataset {
  InteractionDataset train;  // events with t <= t_split, horizon t_split
  InteractionDataset test;   // events with t > t_split, horizon of the input
  double t_split = 0.0;
  bool empty_test = false;
};

/// Train keeps the first ceil(fraction n) interactions plus every later one
/// sharing the last kept timestamp.
inline SplitDataset split_by_time(const InteractionDataset& d, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split_by_time: fraction must be in (0, 1)");
  if (d.empty()) throw std::invalid_argument("split_by_time: empty dataset");
  auto sorted = d;
  sorted.sort();
  const auto n = sorted.size();
  // The relative nudge keeps products like 0.85 * 100 from rounding up.
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) * (1.0 - 1e-12)));
  keep = std::clamp<std::size_t>(keep, 1, n);

  SplitDataset s;
  s.t_split = sorted.interactions[keep - 1].t;
  for (auto* part : {&s.train, &s.test}) {
    part->node_count = sorted.node_count;
    part->atoms = sorted.atoms;
    part->node_atom = sorted.node_atom;
    part->labels = sorted.labels;
  }
  s.train.horizon = s.t_split;
  s.test.horizon = sorted.horizon;
  for (const auto& x : sorted.interactions) (x.t <= s.t_split ? s.train : s.test).interactions.push_back(x);
  s.empty_test = s.test.empty();
  return s;
}

// ---------------------------------------------------------------- models

enum class ModelTag { hawkes_ccrm, ccrm, hawkes_global, poisson_global };

inline const char* to_string(ModelTag m) {
  switch (m) {
    case ModelTag::hawkes_ccrm: return "hawkes_ccrm";
    case ModelTag::ccrm: return "ccrm";
    case ModelTag::hawkes_global: return "hawkes_global";
    case ModelTag::poisson_global: return "poisson_global";
  }
  return "?";
}

inline ModelTag parse_model(const std::string& s) {
  for (auto m : {ModelTag::hawkes_ccrm, ModelTag::ccrm, ModelTag::hawkes_global, ModelTag::poisson_global}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown model '" + s + "'");
}

class NonstationaryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct FittedModel {
  ModelTag tag = ModelTag::poisson_global;
  bool fitted = false;
  std::size_t V = 0;
  std::size_t p = 0;
  std::vector<double> w;  // V x p, community models only
  double mu_global = 0.0;
  KernelParams kernel{0.0, 1.0};
  std::optional<PointEstimate> graph;
  std::optional<Stage2Summary> reciprocity;

  bool community() const { return tag == ModelTag::hawkes_ccrm || tag == ModelTag::ccrm; }

  double base_rate(NodeId i, NodeId j) const {
    if (!community()) return mu_global;
    double m = 0.0;
    for (std::size_t k = 0; k < p; ++k) m += w[i * p + k] * w[j * p + k];
    return m;
  }
};

struct FitConfig {
  Stage1Config stage1;
  Stage2Config stage2;
};

// Plug-in kernel: posterior means.
inline KernelParams kernel_from(const Stage2Summary& s) { return {s.eta.mean, s.delta.mean}; }

inline FittedModel fit_from_estimate(ModelTag tag, const PointEstimate& est) {
  FittedModel m;
  m.tag = tag;
  m.V = est.V;
  m.p = est.p;
  m.w = est.w_hat;
  m.graph = est;
  m.fitted = true;
  return m;
}

/// Stage 2 given base rates from an already fitted community model.
inline FittedModel fit_reciprocity(FittedModel m, const InteractionDataset& train, const Stage2Config& cfg) {
  const auto records = pair_histories(train, train.horizon);
  const auto data = make_stage2_data(records, train.horizon, [&](NodeId i, NodeId j) { return m.base_rate(i, j); }, cfg);
  const auto samples = run_stage2(data, cfg);
  m.reciprocity = samples.summary();
  m.kernel = kernel_from(*m.reciprocity);
  return m;
}

/// Fits each requested model on the training window; stage 1 runs at most
/// once and is shared by the two community models.
inline std::vector<FittedModel> fit_models(const InteractionDataset& train, const std::vector<ModelTag>& tags,
                                           const FitConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("fit_models: empty training set");
  if (!(train.horizon > 0.0)) throw std::invalid_argument("fit_models: training window has zero length");
  const double T = train.horizon;
  std::optional<PointEstimate> est;
  std::vector<FittedModel> out;
  for (auto tag : tags) {
    FittedModel m;
    m.tag = tag;
    switch (tag) {
      case ModelTag::poisson_global: {
        m.mu_global = static_cast<double>(train.size()) / (static_cast<double>(directed_counts(train).size()) * T);
        m.fitted = true;
        break;
      }
      case ModelTag::hawkes_global: {
        auto c2 = cfg.stage2;
        c2.shared_mu = true;
        const auto data = make_stage2_data(pair_histories(train, T), T, [](NodeId, NodeId) { return 1.0; }, c2);
        const auto summary = run_stage2(data, c2).summary();
        m.reciprocity = summary;
        m.kernel = kernel_from(summary);
        m.mu_global = summary.mu.mean;
        m.fitted = true;
        break;
      }
      case ModelTag::ccrm:
      case ModelTag::hawkes_ccrm: {
        if (!est) {
          const auto samples = run_stage1(binary_projection(train), T, cfg.stage1);
          if (!samples.ok()) throw std::runtime_error("stage 1: " + samples.error);
          est = mbr_point_estimate(samples);
        }
        m = fit_from_estimate(tag, *est);
        if (tag == ModelTag::hawkes_ccrm) m = fit_reciprocity(std::move(m), train, cfg.stage2);
        break;
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------- forecasts

struct WindowCounts {
  double forward = 0.0;   // i -> j, i = pair.first
  double backward = 0.0;
  double sd_forward = 0.0;  // per-replicate sd (simulation only)
  double sd_backward = 0.0;
};

/// Expected counts on (s, s + dt] given the intensities just after s. The
/// mean intensities solve m' = A m + delta mu with A = [[-delta, eta],
/// [eta, -delta]]; the sum and the difference of the two directions decouple
/// with rates delta - eta and delta + eta.
inline WindowCounts expected_window_counts(const PairRate& r, const KernelParams& k, const PairExcitation& x, double dt) {
  k.validate();
  if (!k.stationary()) throw NonstationaryError("forecast: eta >= delta (non-stationary)");
  if (!(dt >= 0.0)) throw std::invalid_argument("forecast: window length must be >= 0");
  const double lf = r.mu_ij + k.eta * x.on_forward;
  const double lb = r.mu_ji + k.eta * x.on_backward;
  auto integral = [&](double x0, double rate, double drive) {
    const double inf = drive / rate;
    return inf * dt - (x0 - inf) * std::expm1(-rate * dt) / rate;
  };
  const double sum = integral(lf + lb, k.delta - k.eta, k.delta * (r.mu_ij + r.mu_ji));
  const double diff = integral(lf - lb, k.delta + k.eta, k.delta * (r.mu_ij - r.mu_ji));
  return {0.5 * (sum + diff), 0.5 * (sum - diff), 0.0, 0.0};
}

template <class URBG>
WindowCounts simulated_window_counts(const PairRate& r, const KernelParams& k, const PairExcitation& x, double dt,
                                     std::size_t replicates, URBG& rng) {
  k.validate();
  if (!k.stationary()) throw NonstationaryError("forecast: eta >= delta (non-stationary)");
  if (replicates == 0) throw std::invalid_argument("forecast: need >= 1 replicate");
  std::vector<double> f(replicates, 0.0), b(replicates, 0.0);
  for (std::size_t m = 0; m < replicates; ++m) {
    simulate_pair_window(r, k, 0.0, dt, x, rng, [&](double, Direction d) { (d == Direction::forward ? f[m] : b[m]) += 1.0; });
  }
  return {mean_of(f), mean_of(b), std::sqrt(variance_of(f)), std::sqrt(variance_of(b))};
}

enum class ForecastMethod { analytic, simulate };

struct ForecastOptions {
  ForecastMethod method = ForecastMethod::analytic;
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
};

struct DirectedPrediction {
  NodeId i = 0;
  NodeId j = 0;
  double predicted = 0.0;
  double actual = 0.0;
  double sd = 0.0;  // Monte Carlo sd of one replicate, simulate mode
  bool in_train = false;
};

struct PredictionReport {
  ModelTag model = ModelTag::poisson_global;
  ForecastMethod method = ForecastMethod::analytic;
  std::vector<DirectedPrediction> pairs;
  double rmse = 0.0;        // all directed pairs active in train or test
  double rmse_train = 0.0;  // only pairs active in train
  std::size_t train_pairs = 0;
};

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw std::invalid_argument("rmse: size mismatch");
  if (pred.empty()) throw std::invalid_argument("rmse: empty pair set");
  double ss = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) ss += (pred[n] - actual[n]) * (pred[n] - actual[n]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

/// Forecasts each directed pair over (t_split, t_end], seeding the excitation
/// with every training event. Pairs never seen in training start from their
/// base rate alone.
inline std::vector<DirectedPrediction> predict_counts(const FittedModel& model, const InteractionDataset& train,
                                                      double t_end, const std::vector<std::pair<NodeId, NodeId>>& pairs,
                                                      const ForecastOptions& opt = {}) {
  if (!model.fitted) throw std::invalid_argument("predict_counts: model not fitted");
  const double t_split = train.horizon, dt = t_end - t_split;
  if (!(dt >= 0.0)) throw std::invalid_argument("predict_counts: test window ends before the split");

  std::unordered_map<Edge, std::size_t, EdgeHash> index;
  std::vector<PairRecord> records;
  if (train.horizon > 0.0) records = pair_histories(train, train.horizon);
  for (std::size_t n = 0; n < records.size(); ++n) index[records[n].pair] = n;

  std::unordered_map<Edge, WindowCounts, EdgeHash> cache;
  std::vector<DirectedPrediction> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i == j) throw std::invalid_argument("predict_counts: self pair");
    const Edge e = make_edge(i, j);
    auto it = cache.find(e);
    if (it == cache.end()) {
      PairExcitation x;
      const auto found = index.find(e);
      if (found != index.end()) x = excitation_at(records[found->second].history, model.kernel.delta, t_split);
      const PairRate r{model.base_rate(e.first, e.second), model.base_rate(e.second, e.first)};
      WindowCounts c;
      if (opt.method == ForecastMethod::analytic) {
        c = expected_window_counts(r, model.kernel, x, dt);
      } else {
        const std::uint64_t key = (static_cast<std::uint64_t>(e.first) << 32) | e.second;
        Rng rng = make_stream(opt.seed, key, kForecastSalt);
        c = simulated_window_counts(r, model.kernel, x, dt, opt.replicates, rng);
      }
      it = cache.emplace(e, c).first;
    }
    const bool fwd = i == e.first;
    DirectedPrediction pr;
    pr.i = i;
    pr.j = j;
    pr.predicted = fwd ? it->second.forward : it->second.backward;
    pr.sd = fwd ? it->second.sd_forward : it->second.sd_backward;
    out.push_back(pr);
  }
  return out;
}

/// Scores a fitted model on the test window over every directed pair active
/// in train or test.
inline PredictionReport evaluate_model(const FittedModel& model, const SplitDataset& split,
                                       const ForecastOptions& opt = {}) {
  const auto train_counts = directed_counts(split.train);
  const auto test_counts = directed_counts(split.test);
  std::map<std::pair<NodeId, NodeId>, bool> keys;
  for (const auto& kv : train_counts) keys[kv.first] = true;
  for (const auto& kv : test_counts) keys.emplace(kv.first, false);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& kv : keys) pairs.push_back(kv.first);

  PredictionReport rep;
  rep.model = model.tag;
  rep.method = opt.method;
  rep.pairs = predict_counts(model, split.train, split.test.horizon, pairs, opt);
  std::vector<double> pred, act, pred_tr, act_tr;
  for (auto& pr : rep.pairs) {
    const auto key = std::make_pair(pr.i, pr.j);
    const auto hit = test_counts.find(key);
    pr.actual = hit == test_counts.end() ? 0.0 : static_cast<double>(hit->second);
    pr.in_train = keys[key];
    pred.push_back(pr.predicted);
    act.push_back(pr.actual);
    if (pr.in_train) {
      pred_tr.push_back(pr.predicted);
      act_tr.push_back(pr.actual);
    }
  }
  rep.rmse = rmse(pred, act);
  rep.train_pairs = pred_tr.size();
  rep.rmse_train = pred_tr.empty() ? std::numeric_limits<double>::quiet_NaN() : rmse(pred_tr, act_tr);
  return rep;
}

// ---------------------------------------------------------------- degrees

struct DegreeHistogram {
  // Bin b holds degrees in [lower[b], upper[b]]; doubling widths from 1.
  std::vector<std::size_t> lower, upper;
  std::vector<double> empirical, mean, q05, q95;
  std::size_t replicates = 0;

  std::size_t bins() const { return lower.size(); }

  // Share of bins (with any mass, observed or predicted) whose empirical count
  // lies in the 5-95% predictive band.
  double coverage() const {
    std::size_t used = 0, hit = 0;
    for (std::size_t b = 0; b < bins(); ++b) {
      if (empirical[b] == 0.0 && q95[b] == 0.0) continue;
      ++used;
      if (empirical[b] >= q05[b] && empirical[b] <= q95[b]) ++hit;
    }
    return used ? static_cast<double>(hit) / static_cast<double>(used) : 1.0;
  }
};

inline std::size_t degree_bin(std::size_t degree) {
  std::size_t b = 0;
  while ((std::size_t{2} << b) <= degree) ++b;
  return b;
}

inline std::vector<double> binned_degrees(const BinaryGraph& g) {
  std::vector<double> h;
  for (auto deg : g.degrees()) {
    if (deg == 0) continue;
    const auto b = degree_bin(deg);
    if (h.size() <= b) h.resize(b + 1, 0.0);
    h[b] += 1.0;
  }
  return h;
}

struct HyperDraw {
  GgpHyper ggp;
  CcrmHyper ccrm;
};

/// Degree histograms of graphs simulated from posterior hyperparameter draws
/// (replicate r uses draw floor(r N / R)), beside the empirical one. The
/// fitted kernel is used: reciprocal events can add the reverse edge of a pair.
inline DegreeHistogram posterior_predictive_degrees(std::span<const HyperDraw> draws, const KernelParams& k, double T,
                                                    const BinaryGraph& empirical, std::size_t replicates,
                                                    std::uint64_t seed, const GeneratorOptions& gen = {}) {
  if (replicates == 0) throw std::invalid_argument("posterior_predictive_degrees: need >= 1 replicate");
  if (draws.empty()) throw std::invalid_argument("posterior_predictive_degrees: no hyperparameter draws");
  std::vector<std::vector<double>> reps;
  std::size_t width = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto& h = draws[r * draws.size() / replicates];
    const auto d = generate(h.ggp, h.ccrm, k, T, stream_seed(seed, r, kDegreeSalt), gen);
    reps.push_back(binned_degrees(binary_projection(d)));
    width = std::max(width, reps.back().size());
  }
  DegreeHistogram out;
  out.replicates = replicates;
  auto emp = binned_degrees(empirical);
  width = std::max(width, emp.size());
  emp.resize(width, 0.0);
  for (std::size_t b = 0; b < width; ++b) {
    std::vector<double> xs;
    for (auto& rep : reps) xs.push_back(b < rep.size() ? rep[b] : 0.0);
    out.lower.push_back(std::size_t{1} << b);
    out.upper.push_back((std::size_t{2} << b) - 1);
    out.empirical.push_back(emp[b]);
    out.mean.push_back(mean_of(xs));
    out.q05.push_back(quantile_of(xs, 0.05));
    out.q95.push_back(quantile_of(xs, 0.95));
  }
  return out;
}

inline DegreeHistogram posterior_predictive_degrees(const GgpHyper& h, const CcrmHyper& c, const KernelParams& k,
                                                    double T, const BinaryGraph& empirical, std::size_t replicates,
                                                    std::uint64_t seed, const GeneratorOptions& gen = {}) {
  const HyperDraw one{h, c};
  return posterior_predictive_degrees(std::span<const HyperDraw>(&one, 1), k, T, empirical, replicates, seed, gen);
}

}  // namespace hccrm
