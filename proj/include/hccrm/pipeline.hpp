#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hccrm/dataset.hpp"
#include "hccrm/eval_predict.hpp"
#include "hccrm/generator.hpp"
#include "hccrm/inference_graph.hpp"
#include "hccrm/inference_kernel.hpp"
#include "hccrm/io.hpp"
#include "hccrm/moments.hpp"

namespace hccrm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

inline constexpr std::uint64_t kMomentReplicateSalt = 51;

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, fs::path checkpoint, const std::string& what)
      : std::runtime_error(stage + " failed: " + what +
                           (checkpoint.empty() ? std::string() : " (checkpoint: " + checkpoint.string() + ")")),
        stage_(std::move(stage)),
        checkpoint_(std::move(checkpoint)) {}
  const std::string& stage() const { return stage_; }
  const fs::path& checkpoint() const { return checkpoint_; }

 private:
  std::string stage_;
  fs::path checkpoint_;
};

// Writes files under one run directory and records them for the manifest.
class RunWriter {
 public:
  RunWriter(const RunConfig& cfg) : cfg_(cfg), root_(cfg.out), hash_(cfg.hash()) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }
  const std::string& hash() const { return hash_; }

  std::string csv_header() const { return std::string("# ") + kSoftware + " " + kVersion + " config " + hash_ + "\n"; }

  ordered_json meta() const {
    ordered_json m;
    m["software"] = kSoftware;
    m["version"] = kVersion;
    m["config_hash"] = hash_;
    m["command"] = cfg_.command;
    m["seed"] = cfg_.seed;
    return m;
  }

  fs::path path(const std::string& rel) const { return root_ / rel; }

  void write(const std::string& rel, const std::string& body) {
    const fs::path p = path(rel);
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << body;
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    files_[rel] = hex64(fnv1a(body));
  }

  void write_csv(const std::string& rel, const std::string& rows) { write(rel, csv_header() + rows); }

  void write_json(const std::string& rel, ordered_json body) {
    ordered_json doc;
    doc["meta"] = meta();
    for (auto& [k, v] : body.items()) doc[k] = std::move(v);
    write(rel, doc.dump(2) + "\n");
  }

  void note(const std::string& key, ordered_json value) { notes_[key] = std::move(value); }

  // Content only: no timestamps, so identical runs give identical manifests.
  void write_manifest() {
    ordered_json m;
    m["meta"] = meta();
    std::istringstream lines(cfg_.canonical());
    ordered_json config = ordered_json::object();
    for (std::string line; std::getline(lines, line);) {
      const auto eq = line.find('=');
      config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    m["config"] = config;
    ordered_json files = ordered_json::array();
    for (const auto& [rel, h] : files_) files.push_back({{"path", rel}, {"fnv1a", h}});
    m["files"] = files;
    if (!notes_.empty()) m["notes"] = notes_;
    const std::string body = m.dump(2) + "\n";
    std::ofstream out(path("manifest.json"), std::ios::binary);
    out << body;
  }

 private:
  const RunConfig& cfg_;
  fs::path root_;
  std::string hash_;
  std::map<std::string, std::string> files_;
  ordered_json notes_ = ordered_json::object();
};

// ---------------------------------------------------------------- helpers

inline InteractionDataset load_dataset(const RunConfig& cfg, RunWriter& w) {
  if (cfg.data.empty()) throw std::invalid_argument("no dataset: set data.path in the config");
  ParsedEdgeList parsed;
  try {
    parsed = parse_edge_list(cfg.data, cfg.edges);
  } catch (const std::exception& e) {
    throw StageError("parse", {}, e.what());
  }
  const auto g = binary_projection(parsed.data);
  std::size_t ties = 0;
  for (std::size_t n = 1; n < parsed.data.size(); ++n) {
    const auto &a = parsed.data.interactions[n - 1], &b = parsed.data.interactions[n];
    ties += a.t == b.t && make_edge(a.i, a.j) == make_edge(b.i, b.j) ? 1 : 0;
  }
  w.note("dataset", {{"path", cfg.data},
                     {"nodes", parsed.data.node_count},
                     {"edges", directed_counts(parsed.data).size()},
                     {"undirected_edges", g.edges.size()},
                     {"interactions", parsed.data.size()},
                     {"horizon", parsed.data.horizon},
                     {"self_loops_dropped", parsed.self_loops},
                     {"tied_pair_events", ties},
                     {"tie_rule", "events at the same instant do not excite each other"}});
  return std::move(parsed.data);
}

inline std::string node_label(const InteractionDataset& d, std::size_t i) {
  return d.labels.empty() ? std::to_string(i) : d.labels[i];
}

inline ordered_json to_json(const ParamSummary& s) {
  return {{"mean", s.mean}, {"q025", s.q025}, {"q975", s.q975}, {"rhat", s.rhat}};
}

inline ordered_json to_json(const Stage2Summary& s, bool shared_mu) {
  ordered_json j;
  j["eta"] = to_json(s.eta);
  j["delta"] = to_json(s.delta);
  if (shared_mu) j["mu"] = to_json(s.mu);
  j["accept_eta"] = s.accept_eta;
  j["accept_delta"] = s.accept_delta;
  j["nonstationary_mass"] = s.nonstationary_mass;
  j["draws"] = s.draws;
  return j;
}

inline ordered_json to_json(const PointEstimate& e) {
  return {{"V", e.V},
          {"p", e.p},
          {"samples", e.samples},
          {"alpha", e.ggp_hat.alpha},
          {"sigma", e.ggp_hat.sigma},
          {"tau", e.ggp_hat.tau},
          {"a", e.ccrm_hat.a},
          {"b", e.ccrm_hat.b},
          {"w_rem", e.w_rem_hat},
          {"w0", e.w0_hat},
          {"w", e.w_hat}};
}

inline PointEstimate point_estimate_from_json(const ordered_json& j) {
  PointEstimate e;
  e.V = j.at("V").get<std::size_t>();
  e.p = j.at("p").get<std::size_t>();
  e.samples = j.at("samples").get<std::size_t>();
  e.ggp_hat = {j.at("alpha").get<double>(), j.at("sigma").get<double>(), j.at("tau").get<double>()};
  e.ccrm_hat = {j.at("a").get<std::vector<double>>(), j.at("b").get<std::vector<double>>()};
  e.w_rem_hat = j.at("w_rem").get<std::vector<double>>();
  e.w0_hat = j.at("w0").get<std::vector<double>>();
  e.w_hat = j.at("w").get<std::vector<double>>();
  if (e.w_hat.size() != e.V * e.p || e.w0_hat.size() != e.V) throw std::runtime_error("checkpoint: inconsistent sizes");
  return e;
}

inline ordered_json to_json(const std::vector<HyperDraw>& draws) {
  ordered_json j = ordered_json::array();
  for (const auto& d : draws) {
    j.push_back({{"alpha", d.ggp.alpha}, {"sigma", d.ggp.sigma}, {"tau", d.ggp.tau}, {"a", d.ccrm.a}, {"b", d.ccrm.b}});
  }
  return j;
}

inline std::vector<HyperDraw> hyper_draws_from_json(const ordered_json& j) {
  std::vector<HyperDraw> out;
  for (const auto& d : j) {
    out.push_back({{d.at("alpha").get<double>(), d.at("sigma").get<double>(), d.at("tau").get<double>()},
                   {d.at("a").get<std::vector<double>>(), d.at("b").get<std::vector<double>>()}});
  }
  return out;
}

inline Stage1Config stage1_config(const RunConfig& cfg) {
  auto c = cfg.stage1;
  c.seed = cfg.seed;
  return c;
}

inline Stage2Config stage2_config(const RunConfig& cfg) {
  auto c = cfg.stage2;
  c.seed = cfg.seed;
  return c;
}

// ---------------------------------------------------------------- stages

struct GraphFit {
  PointEstimate estimate;
  std::vector<HyperDraw> draws;  // retained hyperparameter samples, all chains
};

/// Stage 1 on d, writing traces and the point-estimate checkpoint under
/// `dir`. With resume set, a checkpoint from an identical config is reused.
inline GraphFit run_graph_stage(const RunConfig& cfg, const InteractionDataset& d, RunWriter& w,
                                     const std::string& dir) {
  const std::string ckpt_rel = dir + "/point_estimate.json";
  const fs::path ckpt = w.path(ckpt_rel);
  if (cfg.resume && fs::exists(ckpt)) {
    std::ifstream in(ckpt, std::ios::binary);
    const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      const auto j = ordered_json::parse(body);
      if (j.at("meta").at("config_hash") == w.hash() && j.at("estimate").at("V") == d.node_count) {
        GraphFit fit{point_estimate_from_json(j.at("estimate")), hyper_draws_from_json(j.at("hyper_draws"))};
        w.write(ckpt_rel, body);
        w.note("resumed", ckpt_rel);
        return fit;
      }
    } catch (const std::exception& e) {
      throw StageError("stage1", ckpt, std::string("unreadable checkpoint: ") + e.what());
    }
  }

  const auto s1 = stage1_config(cfg);
  Stage1Samples samples;
  try {
    samples = run_stage1(binary_projection(d), d.horizon, s1);
  } catch (const std::exception& e) {
    throw StageError("stage1", ckpt, e.what());
  }
  if (!samples.ok()) throw StageError("stage1", ckpt, samples.error);

  std::ostringstream trace, hyper;
  trace << "chain,iteration,log_post,alpha,sigma,tau,step,hyper_scale,hmc_accept,hyper_accept\n";
  hyper << "chain,iteration,alpha,sigma,tau";
  for (std::size_t k = 0; k < s1.p; ++k) hyper << ",a" << k << ",b" << k << ",w_rem" << k;
  hyper << ",log_post\n";
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    for (const auto& r : samples.chains[c].trace) {
      trace << c << ',' << r.iteration << ',' << fmt(r.log_post) << ',' << fmt(r.alpha) << ',' << fmt(r.sigma) << ','
            << fmt(r.tau) << ',' << fmt(r.step) << ',' << fmt(r.hyper_scale) << ',' << fmt(r.hmc_accept) << ','
            << fmt(r.hyper_accept) << '\n';
    }
    for (const auto& s : samples.chains[c].snapshots) {
      hyper << c << ',' << s.iteration << ',' << fmt(s.ggp.alpha) << ',' << fmt(s.ggp.sigma) << ',' << fmt(s.ggp.tau);
      for (std::size_t k = 0; k < s1.p; ++k) {
        hyper << ',' << fmt(s.ccrm.a[k]) << ',' << fmt(s.ccrm.b[k]) << ',' << fmt(s.w_rem[k]);
      }
      hyper << ',' << fmt(s.log_post) << '\n';
    }
  }
  w.write_csv(dir + "/trace.csv", trace.str());
  w.write_csv(dir + "/hyper.csv", hyper.str());

  PointEstimate est;
  try {
    est = mbr_point_estimate(samples);
  } catch (const std::exception& e) {
    throw StageError("stage1", ckpt, e.what());
  }
  std::ostringstream weights;
  weights << "node,w0";
  for (std::size_t k = 0; k < est.p; ++k) weights << ",w" << k;
  weights << '\n';
  for (std::size_t i = 0; i < est.V; ++i) {
    weights << node_label(d, i) << ',' << fmt(est.w0_hat[i]);
    for (std::size_t k = 0; k < est.p; ++k) weights << ',' << fmt(est.w_hat[i * est.p + k]);
    weights << '\n';
  }
  w.write_csv(dir + "/weights.csv", weights.str());

  ordered_json diag;
  for (const auto& c : samples.chains) {
    diag.push_back({{"hmc_accept", c.hmc_accept},
                    {"hyper_accept", c.hyper_accept},
                    {"step", c.final_step},
                    {"hyper_scale", c.final_hyper_scale},
                    {"diverged", c.diverged}});
  }
  std::vector<HyperDraw> draws;
  for (const auto& c : samples.chains) {
    for (const auto& snap : c.snapshots) draws.push_back({snap.ggp, snap.ccrm});
  }
  w.write_json(ckpt_rel, {{"estimate", to_json(est)}, {"chains", diag}, {"hyper_draws", to_json(draws)}});
  return {std::move(est), std::move(draws)};
}

struct ReciprocityFit {
  Stage2Summary summary;
  KernelParams kernel;
};

inline ReciprocityFit run_kernel_stage(const RunConfig& cfg, const InteractionDataset& d, const PointEstimate& est,
                                       RunWriter& w, const std::string& dir, const fs::path& checkpoint) {
  const auto s2 = stage2_config(cfg);
  Stage2Samples samples;
  try {
    const auto model = fit_from_estimate(ModelTag::hawkes_ccrm, est);
    const auto data = make_stage2_data(pair_histories(d, d.horizon), d.horizon,
                                       [&](NodeId i, NodeId j) { return model.base_rate(i, j); }, s2);
    if (data.pairs.empty()) throw std::runtime_error("no pair has events");
    samples = run_stage2(data, s2);
  } catch (const std::exception& e) {
    throw StageError("stage2", checkpoint, e.what());
  }
  std::ostringstream draws;
  draws << "chain,iteration,eta,delta,log_post\n";
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    for (const auto& r : samples.chains[c].draws) {
      draws << c << ',' << r.iteration << ',' << fmt(r.eta) << ',' << fmt(r.delta) << ',' << fmt(r.log_post) << '\n';
    }
  }
  w.write_csv(dir + "/draws.csv", draws.str());
  ReciprocityFit out{samples.summary(), {}};
  out.kernel = kernel_from(out.summary);
  w.write_json(dir + "/summary.json", {{"kernel", to_json(out.summary, false)}});
  return out;
}

// ---------------------------------------------------------------- commands

inline void command_simulate(const RunConfig& cfg, RunWriter& w) {
  const auto c = cfg.model.ccrm();
  GeneratorOptions gen;
  gen.eps = cfg.model.eps;
  InteractionDataset d;
  try {
    d = generate(cfg.model.ggp, c, cfg.model.kernel, cfg.model.T, cfg.seed, gen);
  } catch (const std::exception& e) {
    throw StageError("simulate", {}, e.what());
  }
  std::ostringstream edges;
  write_edge_list(edges, d);
  w.write("simulate/edges.txt", w.csv_header() + edges.str());

  std::ostringstream atoms;
  atoms << "node,atom,w0";
  for (std::size_t k = 0; k < c.p(); ++k) atoms << ",beta" << k << ",w" << k;
  atoms << '\n';
  std::vector<long> node_of(d.atoms.size(), -1);  // -1: atom without interactions
  for (std::size_t i = 0; i < d.node_atom.size(); ++i) node_of[d.node_atom[i]] = static_cast<long>(i);
  for (std::size_t q = 0; q < d.atoms.size(); ++q) {
    const auto& a = d.atoms[q];
    const long node = node_of[q];
    atoms << node << ',' << q << ',' << fmt(a.w0);
    for (std::size_t k = 0; k < c.p(); ++k) atoms << ',' << fmt(a.beta[k]) << ',' << fmt(a.w[k]);
    atoms << '\n';
  }
  w.write_csv("simulate/atoms.csv", atoms.str());

  const auto counts = network_counts(d);
  w.write_json("simulate/summary.json", {{"interactions", counts.interactions},
                                         {"edges", counts.edges},
                                         {"nodes", counts.nodes},
                                         {"atoms", d.atoms.size()},
                                         {"horizon", d.horizon}});
}

inline ordered_json moments_report(const RunConfig& cfg) {
  const auto c = cfg.model.ccrm();
  const auto& h = cfg.model.ggp;
  const double T = cfg.model.T;
  MomentOptions mo;
  mo.seed = cfg.seed;
  mo.samples = cfg.moment_samples;
  const double EI = expected_interactions(h, c, cfg.model.kernel, T);
  const auto EE = expected_edges(h, c, T, mo);
  const auto EV = expected_nodes(h, c, T, mo);

  // Replicates drop atoms below the generator's eps; bound what that removes.
  GeneratorOptions gen;
  gen.eps = cfg.moment_generator_eps > 0.0 ? cfg.moment_generator_eps : cfg.model.eps;
  const double gen_bound = detail::small_atom_bound(h, c, T, gen.eps);

  const std::size_t R = cfg.moment_replicates;
  std::vector<double> I, E, V;
  for (std::size_t r = 0; r < R; ++r) {
    const auto n = network_counts(generate(h, c, cfg.model.kernel, T, stream_seed(cfg.seed, r, kMomentReplicateSalt), gen));
    I.push_back(n.interactions);
    E.push_back(n.edges);
    V.push_back(n.nodes);
  }
  auto row = [&](double expected, const MomentEstimate* m, double bias_bound, const std::vector<double>& xs) {
    ordered_json j;
    j["expected"] = expected;
    double se_expected = 0.0;
    if (m) {
      j["method"] = to_string(m->method);
      j["expected_se"] = m->stderr_;
      j["truncation_bound"] = m->truncation_bound;
      se_expected = m->stderr_;
    } else {
      j["method"] = "closed form";
    }
    const double mean = mean_of(xs);
    const double se = R > 1 ? std::sqrt(variance_of(xs) / static_cast<double>(R)) : 0.0;
    const double se_all = std::hypot(se, se_expected);
    j["simulated_mean"] = mean;
    j["simulated_se"] = se;
    j["generator_bias_bound"] = bias_bound;
    j["z"] = se_all > 0.0 ? (mean - expected) / se_all : 0.0;
    return j;
  };
  return {{"replicates", R},
          {"generator_eps", gen.eps},
          {"interactions", row(EI, nullptr, h.alpha * h.alpha * gen_bound / T * expected_count(1.0, cfg.model.kernel, T), I)},
          {"edges", row(EE.value, &EE, 0.5 * h.alpha * h.alpha * gen_bound, E)},
          {"nodes", row(EV.value, &EV, h.alpha * h.alpha * gen_bound, V)}};
}

inline void command_moments(const RunConfig& cfg, RunWriter& w) {
  ordered_json rep;
  try {
    rep = moments_report(cfg);
  } catch (const std::exception& e) {
    throw StageError("moments", {}, e.what());
  }
  w.write_json("moments/moments.json", rep);
}

inline void command_fit(const RunConfig& cfg, RunWriter& w) {
  const auto d = load_dataset(cfg, w);
  const auto est = run_graph_stage(cfg, d, w, "fit/stage1").estimate;
  run_kernel_stage(cfg, d, est, w, "fit/stage2", w.path("fit/stage1/point_estimate.json"));
}

inline std::string predictions_csv(const PredictionReport& rep, const InteractionDataset& d) {
  std::ostringstream out;
  out << "src,dst,predicted,actual,sd,in_train\n";
  for (const auto& p : rep.pairs) {
    out << node_label(d, p.i) << ',' << node_label(d, p.j) << ',' << fmt(p.predicted) << ',' << fmt(p.actual) << ','
        << fmt(p.sd) << ',' << (p.in_train ? 1 : 0) << '\n';
  }
  return out.str();
}

inline ordered_json report_json(const PredictionReport& rep, const FittedModel& m) {
  ordered_json j;
  j["model"] = to_string(rep.model);
  j["rmse"] = rep.rmse;
  if (std::isnan(rep.rmse_train)) j["rmse_train_pairs"] = nullptr;
  else j["rmse_train_pairs"] = rep.rmse_train;
  j["pairs"] = rep.pairs.size();
  j["train_pairs"] = rep.train_pairs;
  if (m.reciprocity) j["kernel"] = to_json(*m.reciprocity, m.tag == ModelTag::hawkes_global);
  if (!m.community()) j["mu"] = m.mu_global;
  return j;
}

/// Splits, fits the requested models on the training window and scores each
/// on the test window. `predict` runs the same path for the first model only.
inline void command_evaluate(const RunConfig& cfg, RunWriter& w, bool first_only) {
  const auto d = load_dataset(cfg, w);
  const std::string dir = first_only ? "predict" : "evaluate";
  const auto split = split_by_time(d, cfg.split);
  if (split.train.empty()) throw StageError("split", {}, "training window is empty");
  std::vector<ModelTag> tags = cfg.models;
  if (first_only) tags.resize(1);

  FitConfig fc{stage1_config(cfg), stage2_config(cfg)};
  std::vector<FittedModel> models;
  std::optional<PointEstimate> est;
  for (auto tag : tags) {
    FittedModel m;
    if (tag == ModelTag::ccrm || tag == ModelTag::hawkes_ccrm) {
      if (!est) est = run_graph_stage(cfg, split.train, w, dir + "/stage1").estimate;
      m = fit_from_estimate(tag, *est);
      if (tag == ModelTag::hawkes_ccrm) {
        m.reciprocity = run_kernel_stage(cfg, split.train, *est, w, dir + "/stage2",
                                         w.path(dir + "/stage1/point_estimate.json")).summary;
        m.kernel = kernel_from(*m.reciprocity);
      }
    } else {
      try {
        m = fit_models(split.train, {tag}, fc).front();
      } catch (const std::exception& e) {
        throw StageError(std::string("fit ") + to_string(tag), {}, e.what());
      }
    }
    models.push_back(std::move(m));
  }

  ForecastOptions fo{cfg.forecast, cfg.forecast_replicates, cfg.seed};
  ordered_json results = ordered_json::array();
  for (const auto& m : models) {
    PredictionReport rep;
    try {
      rep = evaluate_model(m, split, fo);
    } catch (const std::exception& e) {
      throw StageError(std::string("predict ") + to_string(m.tag), {}, e.what());
    }
    w.write_csv(dir + "/predictions_" + to_string(m.tag) + ".csv", predictions_csv(rep, d));
    results.push_back(report_json(rep, m));
  }
  w.write_json(dir + "/" + (first_only ? "prediction.json" : "rmse.json"),
               {{"t_split", split.t_split},
                {"horizon", d.horizon},
                {"train_interactions", split.train.size()},
                {"test_interactions", split.test.size()},
                {"forecast", cfg.forecast == ForecastMethod::analytic ? "analytic" : "simulate"},
                {"models", results}});
}

inline void command_degrees(const RunConfig& cfg, RunWriter& w) {
  const auto d = load_dataset(cfg, w);
  const auto fit = run_graph_stage(cfg, d, w, "fit/stage1");
  const auto& est = fit.estimate;
  const fs::path ckpt = w.path("fit/stage1/point_estimate.json");
  const auto kernel = run_kernel_stage(cfg, d, est, w, "fit/stage2", ckpt).kernel;
  DegreeHistogram h;
  try {
    GeneratorOptions gen;
    gen.eps = cfg.model.eps;
    gen.allow_nonstationary = false;
    h = posterior_predictive_degrees(std::span<const HyperDraw>(fit.draws), kernel, d.horizon, binary_projection(d),
                                     cfg.degree_replicates, cfg.seed, gen);
  } catch (const std::exception& e) {
    throw StageError("degrees", ckpt, e.what());
  }
  std::ostringstream out;
  out << "lower,upper,empirical,mean,q05,q95\n";
  for (std::size_t b = 0; b < h.bins(); ++b) {
    out << h.lower[b] << ',' << h.upper[b] << ',' << fmt(h.empirical[b]) << ',' << fmt(h.mean[b]) << ','
        << fmt(h.q05[b]) << ',' << fmt(h.q95[b]) << '\n';
  }
  w.write_csv("degrees/degrees.csv", out.str());
  w.write_json("degrees/summary.json", {{"replicates", h.replicates}, {"bins", h.bins()}, {"coverage", h.coverage()}});
}

/// Runs one command; returns normally on success and throws StageError (or
/// std::invalid_argument for a bad config) otherwise. The manifest is
/// written either way.
inline void run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  RunWriter w(cfg);
  struct ManifestGuard {
    RunWriter& w;
    ~ManifestGuard() {
      try {
        w.write_manifest();
      } catch (...) {
      }
    }
  } guard{w};
  if (cfg.command == "simulate") command_simulate(cfg, w);
  else if (cfg.command == "moments") command_moments(cfg, w);
  else if (cfg.command == "fit") command_fit(cfg, w);
  else if (cfg.command == "predict") command_evaluate(cfg, w, true);
  else if (cfg.command == "evaluate") command_evaluate(cfg, w, false);
  else if (cfg.command == "degrees") command_degrees(cfg, w);
  else throw std::invalid_argument("unknown command '" + cfg.command + "'");
}

}  // namespace hccrm
