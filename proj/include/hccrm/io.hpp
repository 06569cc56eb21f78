#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hccrm/dataset.hpp"
#include "hccrm/eval_predict.hpp"
#include "hccrm/inference_graph.hpp"
#include "hccrm/inference_kernel.hpp"

namespace hccrm {

inline constexpr const char* kSoftware = "hawkes-ccrm";
inline constexpr const char* kVersion = "0.1.0";

// Shortest decimal that reads back to the same double.
inline std::string fmt(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  for (int n = 15; n >= 0; --n, x >>= 4) buf[n] = "0123456789abcdef"[x & 0xf];
  buf[16] = '\0';
  return buf;
}

// ---------------------------------------------------------------- edge lists

struct EdgeListSpec {
  enum Field { src = 0, dst = 1, time = 2 };
  std::array<std::size_t, 3> column{0, 1, 2};  // column index of src, dst, time
  char delimiter = 0;                          // 0: any run of spaces or tabs
  double time_unit = 1.0;                      // raw times are divided by this
  bool zero_base = true;                       // shift so the first time is 0
  std::optional<double> horizon;               // in output units; default: last time

  void validate() const {
    std::array<bool, 3> seen{};
    for (auto c : column) {
      if (c > 2 || seen[c]) throw std::invalid_argument("EdgeListSpec: columns must be a permutation of src,dst,time");
      seen[c] = true;
    }
    if (!(time_unit > 0.0)) throw std::invalid_argument("EdgeListSpec: time unit must be > 0");
  }
};

/// "src,dst,time" lists field names in column order.
inline std::array<std::size_t, 3> parse_format(const std::string& s) {
  std::array<std::size_t, 3> column{3, 3, 3};
  std::stringstream ss(s);
  std::string name;
  std::size_t pos = 0;
  while (std::getline(ss, name, ',')) {
    std::size_t f;
    if (name == "src") f = EdgeListSpec::src;
    else if (name == "dst") f = EdgeListSpec::dst;
    else if (name == "time") f = EdgeListSpec::time;
    else throw std::invalid_argument("format: unknown field '" + name + "'");
    if (column[f] != 3) throw std::invalid_argument("format: field '" + name + "' repeated");
    column[f] = pos++;
  }
  if (pos != 3) throw std::invalid_argument("format: need exactly src, dst and time");
  return column;
}

inline std::string format_string(const std::array<std::size_t, 3>& column) {
  std::array<const char*, 3> names{};
  names[column[0]] = "src";
  names[column[1]] = "dst";
  names[column[2]] = "time";
  return std::string(names[0]) + "," + names[1] + "," + names[2];
}

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParsedEdgeList {
  InteractionDataset data;
  std::size_t lines = 0;
  std::size_t self_loops = 0;  // dropped
  std::size_t comments = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  if (delim == 0) {
    std::size_t n = 0;
    while (n < line.size()) {
      while (n < line.size() && (line[n] == ' ' || line[n] == '\t')) ++n;
      const std::size_t start = n;
      while (n < line.size() && line[n] != ' ' && line[n] != '\t') ++n;
      if (n > start) out.push_back(line.substr(start, n - start));
    }
  } else {
    std::size_t start = 0;
    for (std::size_t n = 0; n <= line.size(); ++n) {
      if (n == line.size() || line[n] == delim) {
        auto f = line.substr(start, n - start);
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
        out.push_back(f);
        start = n + 1;
      }
    }
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  double x;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x)) return std::nullopt;
  return x;
}

inline std::optional<std::int64_t> to_int(std::string_view s) {
  std::int64_t x;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return x;
}

}  // namespace detail

/// Reads timestamped directed interactions. Lines starting with '#' or '%'
/// are comments, except "# horizon <T>" which sets the horizon (raw units).
/// Dense ids follow ascending label order, numeric when every label is an
/// integer. Self-loops are dropped and counted; duplicate rows are kept.
inline ParsedEdgeList parse_edge_list(std::istream& in, const EdgeListSpec& spec) {
  spec.validate();
  ParsedEdgeList out;
  struct Row {
    double t;
    std::string src, dst;
  };
  std::vector<Row> rows;
  std::optional<double> horizon_raw;
  const std::size_t need = *std::max_element(spec.column.begin(), spec.column.end()) + 1;
  std::string line;
  while (std::getline(in, line)) {
    ++out.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view v(line);
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    if (v.empty()) continue;
    if (v.front() == '#' || v.front() == '%') {
      ++out.comments;
      const auto f = detail::split_fields(v.substr(1), 0);
      if (f.size() == 2 && f[0] == "horizon") {
        horizon_raw = detail::to_double(f[1]);
        if (!horizon_raw) throw ParseError(out.lines, "horizon '" + std::string(f[1]) + "' is not a number");
      }
      continue;
    }
    const auto f = detail::split_fields(v, spec.delimiter);
    if (f.size() < need) throw ParseError(out.lines, "expected at least " + std::to_string(need) + " fields");
    const auto src = f[spec.column[EdgeListSpec::src]], dst = f[spec.column[EdgeListSpec::dst]];
    const auto ts = f[spec.column[EdgeListSpec::time]];
    if (src.empty() || dst.empty()) throw ParseError(out.lines, "empty node label");
    const auto t = detail::to_double(ts);
    if (!t) throw ParseError(out.lines, "time '" + std::string(ts) + "' is not a number");
    if (src == dst) {
      ++out.self_loops;
      continue;
    }
    rows.push_back({*t, std::string(src), std::string(dst)});
  }
  if (rows.empty()) throw std::runtime_error("parse_edge_list: no interactions");

  std::vector<std::string> labels;
  {
    std::unordered_map<std::string, char> seen;
    for (const auto& r : rows) {
      if (seen.emplace(r.src, 0).second) labels.push_back(r.src);
      if (seen.emplace(r.dst, 0).second) labels.push_back(r.dst);
    }
  }
  const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& s) { return detail::to_int(s).has_value(); });
  if (numeric) {
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return *detail::to_int(a) < *detail::to_int(b);
    });
  } else {
    std::sort(labels.begin(), labels.end());
  }
  std::unordered_map<std::string, NodeId> id;
  for (std::size_t n = 0; n < labels.size(); ++n) id[labels[n]] = static_cast<NodeId>(n);

  double shift = 0.0;
  if (spec.zero_base) {
    shift = rows.front().t;
    for (const auto& r : rows) shift = std::min(shift, r.t);
  }
  auto& d = out.data;
  d.node_count = labels.size();
  d.labels = std::move(labels);
  d.interactions.reserve(rows.size());
  double last = 0.0;
  for (const auto& r : rows) {
    const double t = (r.t - shift) / spec.time_unit;
    if (t < 0.0) throw std::runtime_error("parse_edge_list: negative time " + fmt(t) + " (enable zero-basing)");
    last = std::max(last, t);
    d.interactions.push_back({t, id[r.src], id[r.dst]});
  }
  if (spec.horizon) {
    d.horizon = *spec.horizon;
  } else if (horizon_raw) {
    d.horizon = (*horizon_raw - shift) / spec.time_unit;
  } else {
    d.horizon = last > 0.0 ? last : 1.0;
  }
  if (d.horizon < last) throw std::runtime_error("parse_edge_list: horizon " + fmt(d.horizon) + " precedes the last event");
  d.sort();
  return out;
}

inline ParsedEdgeList parse_edge_list(const std::string& path, const EdgeListSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_edge_list(in, spec);
}

/// "src dst time" rows at full precision, preceded by the horizon directive.
inline void write_edge_list(std::ostream& out, const InteractionDataset& d) {
  auto label = [&](NodeId n) { return d.labels.empty() ? std::to_string(n) : d.labels[n]; };
  out << "# horizon " << fmt(d.horizon) << '\n';
  for (const auto& x : d.interactions) out << label(x.i) << ' ' << label(x.j) << ' ' << fmt(x.t) << '\n';
}

// ---------------------------------------------------------------- run config

struct ModelSettings {
  GgpHyper ggp{10.0, 0.2, 1.0};
  std::vector<double> a{0.5};
  std::vector<double> b{1.0};
  KernelParams kernel{0.5, 2.0};
  double T = 10.0;
  double eps = 1e-3;

  CcrmHyper ccrm() const { return CcrmHyper{a, b}; }
};

struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool resume = false;

  std::string data;
  EdgeListSpec edges;

  ModelSettings model;

  Stage1Config stage1;
  Stage2Config stage2;

  double split = 0.85;
  std::vector<ModelTag> models{ModelTag::hawkes_ccrm, ModelTag::ccrm, ModelTag::hawkes_global,
                               ModelTag::poisson_global};
  ForecastMethod forecast = ForecastMethod::analytic;
  std::size_t forecast_replicates = 100;

  std::size_t moment_replicates = 50;
  double moment_generator_eps = 0.0;  // 0: model.eps
  std::size_t moment_samples = 20000;  // Levy-measure draws for E[E], E[V] when p > 1
  std::size_t degree_replicates = 100;

  void validate() const {
    if (stage1.iterations == 0 || stage2.iterations == 0) throw std::invalid_argument("config: iterations must be positive");
    stage1.validate();
    stage2.validate();
    edges.validate();
    if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("config: split must be in (0, 1)");
    if (models.empty()) throw std::invalid_argument("config: no models requested");
    if (forecast_replicates == 0 || degree_replicates == 0) throw std::invalid_argument("config: replicates must be >= 1");
  }

  /// Every setting as sorted key=value lines. The command, output directory
  /// and resume flag are excluded: they do not change results.
  std::string canonical() const {
    std::map<std::string, std::string> kv;
    auto list = [](const std::vector<double>& xs) {
      std::string s;
      for (std::size_t n = 0; n < xs.size(); ++n) s += (n ? "," : "") + fmt(xs[n]);
      return s;
    };
    kv["run.seed"] = std::to_string(seed);
    kv["data.path"] = data;
    kv["data.format"] = format_string(edges.column);
    kv["data.delimiter"] = edges.delimiter ? std::string(1, edges.delimiter) : "whitespace";
    kv["data.time_unit"] = fmt(edges.time_unit);
    kv["data.zero_base"] = edges.zero_base ? "true" : "false";
    kv["data.horizon"] = edges.horizon ? fmt(*edges.horizon) : "auto";
    kv["model.alpha"] = fmt(model.ggp.alpha);
    kv["model.sigma"] = fmt(model.ggp.sigma);
    kv["model.tau"] = fmt(model.ggp.tau);
    kv["model.a"] = list(model.a);
    kv["model.b"] = list(model.b);
    kv["model.eta"] = fmt(model.kernel.eta);
    kv["model.delta"] = fmt(model.kernel.delta);
    kv["model.T"] = fmt(model.T);
    kv["model.eps"] = fmt(model.eps);
    kv["stage1.p"] = std::to_string(stage1.p);
    kv["stage1.iterations"] = std::to_string(stage1.iterations);
    kv["stage1.burn_in"] = std::to_string(stage1.burn());
    kv["stage1.thin"] = std::to_string(stage1.thin);
    kv["stage1.chains"] = std::to_string(stage1.chains);
    kv["stage1.init_iterations"] = std::to_string(stage1.init_iters());
    kv["stage1.leapfrog"] = std::to_string(stage1.leapfrog);
    kv["stage1.eps"] = fmt(stage1.eps);
    kv["stage1.prior_shape"] = fmt(stage1.prior.shape);
    kv["stage1.prior_rate"] = fmt(stage1.prior.rate);
    kv["stage1.rescale_scale"] = fmt(stage1.rescale_scale);
    kv["stage1.community_scale"] = fmt(stage1.community_scale);
    kv["stage2.iterations"] = std::to_string(stage2.iterations);
    kv["stage2.burn_in"] = std::to_string(stage2.burn());
    kv["stage2.thin"] = std::to_string(stage2.thin);
    kv["stage2.chains"] = std::to_string(stage2.chains);
    kv["stage2.proposal_eta"] = fmt(stage2.proposal_eta);
    kv["stage2.proposal_delta"] = fmt(stage2.proposal_delta);
    kv["stage2.proposal_is_sd"] = stage2.proposal_is_sd ? "true" : "false";
    kv["stage2.adapt"] = stage2.adapt ? "true" : "false";
    kv["stage2.joint"] = stage2.joint_proposal ? "true" : "false";
    kv["stage2.silent_directions"] = stage2.include_silent_directions ? "true" : "false";
    kv["stage2.prior_rate"] = fmt(stage2.prior_rate_eta);
    kv["evaluate.split"] = fmt(split);
    std::string ms;
    for (std::size_t n = 0; n < models.size(); ++n) ms += (n ? "," : "") + std::string(to_string(models[n]));
    kv["evaluate.models"] = ms;
    kv["evaluate.forecast"] = forecast == ForecastMethod::analytic ? "analytic" : "simulate";
    kv["evaluate.replicates"] = std::to_string(forecast_replicates);
    kv["moments.replicates"] = std::to_string(moment_replicates);
    kv["moments.generator_eps"] = fmt(moment_generator_eps);
    kv["moments.samples"] = std::to_string(moment_samples);
    kv["degrees.replicates"] = std::to_string(degree_replicates);
    std::string s;
    for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
    return s;
  }

  std::string hash() const { return hex64(fnv1a(canonical())); }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string_view v(item);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
    while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
    const auto x = to_double(v);
    if (!x) throw std::invalid_argument("config: '" + item + "' is not a number");
    out.push_back(*x);
  }
  return out;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("config: '" + s + "' is not a boolean");
}

}  // namespace detail

/// Applies an INI tree (sections run, data, model, stage1, stage2, evaluate,
/// moments, degrees) on top of cfg. Unknown keys are errors.
inline void apply_ini(RunConfig& cfg, const boost::property_tree::ptree& tree) {
  using detail::parse_bool;
  using detail::parse_list;
  auto num = [](const std::string& key, const std::string& v) {
    const auto x = detail::to_double(v);
    if (!x) throw std::invalid_argument("config: " + key + " = '" + v + "' is not a number");
    return *x;
  };
  auto count = [&](const std::string& key, const std::string& v) {
    const double x = num(key, v);
    if (!(x >= 0.0) || x != std::floor(x)) throw std::invalid_argument("config: " + key + " must be a whole number");
    return static_cast<std::size_t>(x);
  };
  for (const auto& [section, body] : tree) {
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      const std::string v = node.get_value<std::string>();
      if (key == "run.seed") cfg.seed = count(key, v);
      else if (key == "run.out") cfg.out = v;
      else if (key == "run.resume") cfg.resume = parse_bool(v);
      else if (key == "data.path") cfg.data = v;
      else if (key == "data.format") cfg.edges.column = parse_format(v);
      else if (key == "data.delimiter") cfg.edges.delimiter = v == "whitespace" || v.empty() ? 0 : v[0];
      else if (key == "data.time_unit") cfg.edges.time_unit = num(key, v);
      else if (key == "data.zero_base") cfg.edges.zero_base = parse_bool(v);
      else if (key == "data.horizon") cfg.edges.horizon = num(key, v);
      else if (key == "model.alpha") cfg.model.ggp.alpha = num(key, v);
      else if (key == "model.sigma") cfg.model.ggp.sigma = num(key, v);
      else if (key == "model.tau") cfg.model.ggp.tau = num(key, v);
      else if (key == "model.a") cfg.model.a = parse_list(v);
      else if (key == "model.b") cfg.model.b = parse_list(v);
      else if (key == "model.eta") cfg.model.kernel.eta = num(key, v);
      else if (key == "model.delta") cfg.model.kernel.delta = num(key, v);
      else if (key == "model.T") cfg.model.T = num(key, v);
      else if (key == "model.eps") cfg.model.eps = num(key, v);
      else if (key == "stage1.p") cfg.stage1.p = count(key, v);
      else if (key == "stage1.iterations") cfg.stage1.iterations = count(key, v);
      else if (key == "stage1.burn_in") cfg.stage1.burn_in = count(key, v);
      else if (key == "stage1.thin") cfg.stage1.thin = count(key, v);
      else if (key == "stage1.chains") cfg.stage1.chains = count(key, v);
      else if (key == "stage1.init_iterations") cfg.stage1.init_iterations = count(key, v);
      else if (key == "stage1.leapfrog") cfg.stage1.leapfrog = static_cast<int>(count(key, v));
      else if (key == "stage1.eps") cfg.stage1.eps = num(key, v);
      else if (key == "stage1.prior_shape") cfg.stage1.prior.shape = num(key, v);
      else if (key == "stage1.prior_rate") cfg.stage1.prior.rate = num(key, v);
      else if (key == "stage1.rescale_scale") cfg.stage1.rescale_scale = num(key, v);
      else if (key == "stage1.community_scale") cfg.stage1.community_scale = num(key, v);
      else if (key == "stage2.iterations") cfg.stage2.iterations = count(key, v);
      else if (key == "stage2.burn_in") cfg.stage2.burn_in = count(key, v);
      else if (key == "stage2.thin") cfg.stage2.thin = count(key, v);
      else if (key == "stage2.chains") cfg.stage2.chains = count(key, v);
      else if (key == "stage2.proposal_eta") cfg.stage2.proposal_eta = num(key, v);
      else if (key == "stage2.proposal_delta") cfg.stage2.proposal_delta = num(key, v);
      else if (key == "stage2.proposal_is_sd") cfg.stage2.proposal_is_sd = parse_bool(v);
      else if (key == "stage2.adapt") cfg.stage2.adapt = parse_bool(v);
      else if (key == "stage2.joint") cfg.stage2.joint_proposal = parse_bool(v);
      else if (key == "stage2.silent_directions") cfg.stage2.include_silent_directions = parse_bool(v);
      else if (key == "stage2.prior_rate") cfg.stage2.prior_rate_eta = cfg.stage2.prior_rate_delta = num(key, v);
      else if (key == "evaluate.split") cfg.split = num(key, v);
      else if (key == "evaluate.models") {
        cfg.models.clear();
        std::stringstream ss(v);
        std::string m;
        while (std::getline(ss, m, ',')) cfg.models.push_back(parse_model(m));
      } else if (key == "evaluate.forecast") {
        if (v == "analytic") cfg.forecast = ForecastMethod::analytic;
        else if (v == "simulate") cfg.forecast = ForecastMethod::simulate;
        else throw std::invalid_argument("config: evaluate.forecast must be analytic or simulate");
      } else if (key == "evaluate.replicates") cfg.forecast_replicates = count(key, v);
      else if (key == "moments.replicates") cfg.moment_replicates = count(key, v);
      else if (key == "moments.generator_eps") cfg.moment_generator_eps = num(key, v);
      else if (key == "moments.samples") cfg.moment_samples = count(key, v);
      else if (key == "degrees.replicates") cfg.degree_replicates = count(key, v);
      else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  cfg.stage1.seed = cfg.seed;
  cfg.stage2.seed = cfg.seed;
}

inline void apply_ini(RunConfig& cfg, std::istream& in) {
  boost::property_tree::ptree tree;
  boost::property_tree::ini_parser::read_ini(in, tree);
  apply_ini(cfg, tree);
}

inline void apply_ini_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  apply_ini(cfg, in);
}

}  // namespace hccrm
