#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "hccrm/generator.hpp"
#include "hccrm/pipeline.hpp"

using namespace hccrm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hccrm_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

// Small two-community data set written as an edge list.
fs::path write_dataset(const fs::path& dir, std::uint64_t seed, double T = 10.0) {
  const auto d = generate({12.0, 0.2, 1.0}, CcrmHyper::uniform(2, 0.5, 1.0), {1.0, 3.0}, T, seed);
  const auto path = dir / "edges.txt";
  std::ofstream out(path);
  write_edge_list(out, d);
  return path;
}

RunConfig small_fit(const std::string& command, const fs::path& data, const fs::path& out) {
  RunConfig cfg;
  cfg.command = command;
  cfg.data = data.string();
  cfg.edges.zero_base = false;
  cfg.out = out.string();
  cfg.stage1.p = 2;
  cfg.stage1.iterations = 600;
  cfg.stage1.thin = 5;
  cfg.stage2.iterations = 600;
  cfg.degree_replicates = 20;
  return cfg;
}

}  // namespace

TEST(Pipeline, FitTwiceIsByteIdentical) {
  const auto dir = scratch("determinism");
  const auto data = write_dataset(dir, 3);
  run_pipeline(small_fit("fit", data, dir / "a"));
  run_pipeline(small_fit("fit", data, dir / "b"));
  const auto a = tree(dir / "a"), b = tree(dir / "b");
  ASSERT_EQ(a.size(), 7u);  // 6 stage files + manifest
  for (const auto& rel : {"fit/stage1/trace.csv", "fit/stage1/hyper.csv", "fit/stage1/weights.csv",
                          "fit/stage1/point_estimate.json", "fit/stage2/draws.csv", "fit/stage2/summary.json",
                          "manifest.json"}) {
    ASSERT_TRUE(a.count(rel)) << rel;
    EXPECT_EQ(a.at(rel), b.at(rel)) << rel;
  }
}

TEST(Pipeline, DifferentSeedsGiveDifferentTraces) {
  const auto dir = scratch("seeds");
  const auto data = write_dataset(dir, 3);
  auto cfg = small_fit("fit", data, dir / "a");
  run_pipeline(cfg);
  cfg.seed = 2;
  cfg.out = (dir / "b").string();
  run_pipeline(cfg);
  EXPECT_NE(slurp(dir / "a/fit/stage1/trace.csv"), slurp(dir / "b/fit/stage1/trace.csv"));
}

TEST(Pipeline, EveryFileCarriesVersionAndConfigHash) {
  const auto dir = scratch("headers");
  const auto data = write_dataset(dir, 4);
  const auto cfg = small_fit("degrees", data, dir / "run");
  run_pipeline(cfg);
  const std::string hash = cfg.hash();
  const auto files = tree(dir / "run");
  EXPECT_TRUE(files.count("degrees/degrees.csv"));
  for (const auto& [rel, body] : files) {
    if (rel.ends_with(".json")) {
      const auto j = nlohmann::json::parse(body);
      EXPECT_EQ(j["meta"]["config_hash"], hash) << rel;
      EXPECT_EQ(j["meta"]["version"], kVersion) << rel;
    } else {
      EXPECT_EQ(body.rfind(std::string("# hawkes-ccrm ") + kVersion + " config " + hash + "\n", 0), 0u) << rel;
    }
  }
  const auto manifest = read_json(dir / "run/manifest.json");
  EXPECT_EQ(manifest["files"].size(), files.size() - 1);
  for (const auto& f : manifest["files"]) {
    EXPECT_EQ(f["fnv1a"], hex64(fnv1a(files.at(f["path"].get<std::string>()))));
  }
  EXPECT_EQ(manifest["config"]["stage1.p"], "2");
  EXPECT_EQ(manifest["notes"]["dataset"]["tie_rule"], "events at the same instant do not excite each other");
}

TEST(Pipeline, ResumeReusesAMatchingCheckpointOnly) {
  const auto dir = scratch("resume");
  const auto data = write_dataset(dir, 5);
  auto cfg = small_fit("fit", data, dir / "run");
  run_pipeline(cfg);
  const auto first = tree(dir / "run");

  // Stage 1 is skipped: its trace is gone and not rewritten, stage 2 output is unchanged.
  fs::remove(dir / "run/fit/stage1/trace.csv");
  cfg.resume = true;
  run_pipeline(cfg);
  EXPECT_FALSE(fs::exists(dir / "run/fit/stage1/trace.csv"));
  EXPECT_EQ(slurp(dir / "run/fit/stage2/draws.csv"), first.at("fit/stage2/draws.csv"));
  EXPECT_EQ(read_json(dir / "run/manifest.json")["notes"]["resumed"], "fit/stage1/point_estimate.json");

  // A different config ignores the checkpoint and reruns stage 1.
  cfg.stage1.iterations = 700;
  run_pipeline(cfg);
  EXPECT_TRUE(fs::exists(dir / "run/fit/stage1/trace.csv"));
}

TEST(Pipeline, StageFailuresNameStageAndCheckpoint) {
  const auto dir = scratch("errors");
  const auto data = write_dataset(dir, 6);
  auto cfg = small_fit("fit", data, dir / "run");
  run_pipeline(cfg);
  std::ofstream(dir / "run/fit/stage1/point_estimate.json") << "{ truncated";
  cfg.resume = true;
  try {
    run_pipeline(cfg);
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "stage1");
    EXPECT_EQ(e.checkpoint(), dir / "run/fit/stage1/point_estimate.json");
    EXPECT_NE(std::string(e.what()).find("point_estimate.json"), std::string::npos);
  }

  cfg = small_fit("fit", dir / "missing.txt", dir / "run2");
  try {
    run_pipeline(cfg);
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "parse");
  }
  EXPECT_TRUE(fs::exists(dir / "run2/manifest.json"));

  cfg.command = "train";
  EXPECT_THROW(run_pipeline(cfg), std::invalid_argument);
}

TEST(Pipeline, SimulateDumpsGroundTruthThatParsesBack) {
  const auto dir = scratch("simulate");
  RunConfig cfg;
  cfg.command = "simulate";
  cfg.out = (dir / "run").string();
  cfg.model.ggp = {8.0, 0.3, 1.0};
  cfg.model.a = {0.5, 0.5};
  cfg.model.b = {1.0, 1.0};
  cfg.model.T = 5.0;
  cfg.seed = 9;
  run_pipeline(cfg);
  const auto truth = generate(cfg.model.ggp, cfg.model.ccrm(), cfg.model.kernel, cfg.model.T, cfg.seed);
  EdgeListSpec spec;
  spec.zero_base = false;
  const auto back = parse_edge_list((dir / "run/simulate/edges.txt").string(), spec).data;
  EXPECT_EQ(back.interactions, truth.interactions);
  EXPECT_EQ(back.horizon, truth.horizon);
  const auto summary = read_json(dir / "run/simulate/summary.json");
  EXPECT_EQ(summary["interactions"].get<double>(), static_cast<double>(truth.size()));
  EXPECT_EQ(summary["atoms"].get<std::size_t>(), truth.atoms.size());
  // One row per atom plus the column header and the version line.
  const auto atoms = slurp(dir / "run/simulate/atoms.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(atoms.begin(), atoms.end(), '\n')), truth.atoms.size() + 2);
}

// Four-community instance with b_k = 1/p. The generator runs at eps = 1e-6; at
// 1e-3 the atoms it drops would be a large share of the T = 300 nodes.
TEST(Pipeline, MomentsReportMatchesGeneratorReplicates) {
  const auto dir = scratch("moments");
  RunConfig cfg;
  cfg.command = "moments";
  cfg.out = (dir / "run").string();
  cfg.model.ggp = {50.0, 0.3, 1.0};
  cfg.model.a.assign(4, 0.08);
  cfg.model.b.assign(4, 0.25);
  cfg.model.kernel = {0.85, 3.0};
  cfg.model.T = 300.0;
  cfg.moment_replicates = 50;
  cfg.moment_generator_eps = 1e-6;
  run_pipeline(cfg);
  const auto rep = read_json(dir / "run/moments/moments.json");
  for (const char* key : {"interactions", "edges", "nodes"}) {
    const auto& r = rep[key];
    const double se = std::hypot(r["simulated_se"].get<double>(), r.value("expected_se", 0.0));
    EXPECT_LT(r["generator_bias_bound"].get<double>(), 0.05 * r["expected"].get<double>()) << key;
    EXPECT_LT(std::abs(r["simulated_mean"].get<double>() - r["expected"].get<double>()), 3.0 * se) << key;
  }
}

// Strong reciprocity: the kernel adds most of the events, so the Hawkes forecast
// of the test window should not lose to the base-rate-only model.
TEST(Pipeline, EvaluateWritesRmsePerModel) {
  const auto dir = scratch("evaluate");
  const auto d = generate({15.0, 0.1, 1.0}, CcrmHyper::uniform(2, 0.5, 1.0), {2.0, 3.0}, 20.0, 12);
  {
    std::ofstream out(dir / "edges.txt");
    write_edge_list(out, d);
  }
  auto cfg = small_fit("evaluate", dir / "edges.txt", dir / "run");
  cfg.stage1.iterations = 2000;
  cfg.stage2.iterations = 1000;
  run_pipeline(cfg);
  const auto rep = read_json(dir / "run/evaluate/rmse.json");
  ASSERT_EQ(rep["models"].size(), 4u);
  std::map<std::string, double> rmse;
  for (const auto& m : rep["models"]) {
    rmse[m["model"]] = m["rmse"].get<double>();
    EXPECT_TRUE(fs::exists(dir / ("run/evaluate/predictions_" + m["model"].get<std::string>() + ".csv")));
  }
  EXPECT_EQ(rmse.size(), 4u);
  EXPECT_LE(rmse["hawkes_ccrm"], rmse["ccrm"]);
  EXPECT_EQ(rep["train_interactions"].get<std::size_t>() + rep["test_interactions"].get<std::size_t>(), d.size());
  EXPECT_EQ(rep["models"][0]["kernel"]["eta"]["mean"].is_number(), true);

  cfg.command = "predict";
  run_pipeline(cfg);
  const auto pred = read_json(dir / "run/predict/prediction.json");
  ASSERT_EQ(pred["models"].size(), 1u);
  EXPECT_EQ(pred["models"][0]["rmse"].get<double>(), rmse["hawkes_ccrm"]);
}
