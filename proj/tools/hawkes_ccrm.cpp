#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hccrm/io.hpp"
#include "hccrm/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Two-stage Hawkes-CCRM inference for temporal interaction networks"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, format, data;
  std::optional<double> split;
  std::optional<std::size_t> p, iters1, iters2, chains;
  bool resume = false;

  for (const char* name : {"simulate", "moments", "fit", "predict", "evaluate", "degrees"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI file ([run] [data] [model] [stage1] [stage2] [evaluate] ...)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "run directory");
    sub->add_option("--data", data, "edge list (overrides data.path)");
    sub->add_option("--format", format, "column order, e.g. src,dst,time");
    sub->add_option("--split", split, "training fraction of interactions")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--p", p, "number of communities")->check(CLI::PositiveNumber);
    sub->add_option("--iters-stage1", iters1, "stage-1 iterations")->check(CLI::PositiveNumber);
    sub->add_option("--iters-stage2", iters2, "stage-2 iterations")->check(CLI::PositiveNumber);
    sub->add_option("--chains", chains, "chains per stage")->check(CLI::PositiveNumber);
    sub->add_flag("--resume", resume, "reuse a stage-1 checkpoint written with the same config");
  }
  CLI11_PARSE(app, argc, argv);

  hccrm::RunConfig cfg;
  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) hccrm::apply_ini_file(cfg, config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    if (data) cfg.data = *data;
    if (format) cfg.edges.column = hccrm::parse_format(*format);
    if (split) cfg.split = *split;
    if (p) cfg.stage1.p = *p;
    if (iters1) {
      cfg.stage1.iterations = *iters1;
      if (cfg.stage1.burn_in > *iters1) cfg.stage1.burn_in = std::numeric_limits<std::size_t>::max();
    }
    if (iters2) {
      cfg.stage2.iterations = *iters2;
      if (cfg.stage2.burn_in > *iters2) cfg.stage2.burn_in = std::numeric_limits<std::size_t>::max();
    }
    if (chains) cfg.stage1.chains = cfg.stage2.chains = *chains;
    if (resume) cfg.resume = true;
    hccrm::run_pipeline(cfg);
  } catch (const hccrm::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << cfg.out << '\n';
  return 0;
}
