#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polreeb/dataset_io.hpp"
#include "polreeb/marg.hpp"
#include "polreeb/pipeline.hpp"
#include "polreeb/serialize.hpp"

namespace {

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reeb-graph trajectory anomaly detection"};
  app.require_subcommand(1);

  std::string config_path, root;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  bool dump_json = false;
  app.add_option("--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--root", root, "Dataset root directory (overrides config)");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Simulation seed (overrides config)");
  app.add_flag("--dump-json", dump_json, "Also write JSON renderings of graphs");

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  auto* terg = app.add_subcommand("build-terg", "Build per-agent graphs");
  auto* marg = app.add_subcommand("build-marg", "Build the population graph");
  auto* score = app.add_subcommand("score", "Score test graphs and write detections");
  auto* eval = app.add_subcommand("evaluate", "Compute metrics from detections and truth");
  auto* run = app.add_subcommand("run", "Run build-terg, build-marg, score and evaluate");
  auto* tune = app.add_subcommand("tune", "Grid search over fusion and feature weights");
  auto* bench = app.add_subcommand("bench", "Time graph construction over a point-count ladder");
  std::vector<std::int64_t> ladder{10'000, 100'000, 1'000'000};
  int repeats = 3;
  std::string bench_out;
  bench->add_option("--ladder", ladder, "Point counts (space or comma separated)")->delimiter(',');
  bench->add_option("--repeats", repeats, "Timed repeats per rung")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Write CSV here instead of stdout");
  auto* marg_cmd = app.add_subcommand("marg", "Population graph utilities");
  marg_cmd->require_subcommand(1);
  auto* stats = marg_cmd->add_subcommand("stats", "Print node, edge and support histograms as CSV");
  std::string model;
  stats->add_option("model", model, "Graph file (default <root>/marg/model.rg)");

  CLI11_PARSE(app, argc, argv);

  try {
    polreeb::PipelineConfig cfg;
    if (!config_path.empty()) cfg = polreeb::load_pipeline_config(config_path);
    if (!root.empty()) cfg.root = root;
    if (workers > 0) cfg.workers = workers;
    if (app.count("--seed") > 0) cfg.world.rng_seed = seed;
    if (dump_json) cfg.dump_json = true;
    cfg.validate();

    if (sim->parsed()) {
      polreeb::run_simulate(cfg, log_line);
    } else if (terg->parsed()) {
      polreeb::stage_build_terg(cfg, log_line);
    } else if (marg->parsed()) {
      polreeb::stage_build_marg(cfg, log_line);
    } else if (score->parsed()) {
      polreeb::stage_score(cfg, log_line);
    } else if (eval->parsed()) {
      polreeb::stage_evaluate(cfg, log_line);
    } else if (run->parsed()) {
      polreeb::run_pipeline(cfg, log_line);
    } else if (tune->parsed()) {
      polreeb::tune(cfg, polreeb::tune_weight_grid(cfg.weights), polreeb::tune_alpha_grid(), log_line);
    } else if (bench->parsed()) {
      const std::string csv = polreeb::bench_csv(polreeb::bench(ladder, repeats, app.count("--seed") > 0 ? seed : 7));
      if (bench_out.empty()) std::cout << csv;
      else polreeb::write_text_atomic(bench_out, csv);
    } else if (stats->parsed()) {
      const std::filesystem::path p = model.empty() ? cfg.root / "marg" / "model.rg" : std::filesystem::path(model);
      polreeb::write_marg_stats(std::cout, polreeb::load_graph(p));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
