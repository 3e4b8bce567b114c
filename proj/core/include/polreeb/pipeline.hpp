#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polreeb/error.hpp"
#include "polreeb/evalx.hpp"
#include "polreeb/features.hpp"
#include "polreeb/marg.hpp"
#include "polreeb/scoring.hpp"
#include "polreeb/serialize.hpp"
#include "polreeb/simgen.hpp"
#include "polreeb/terg.hpp"

namespace polreeb {

struct PipelineConfig {
  std::filesystem::path root = "data";
  std::size_t workers = 4;
  EpsilonConfig epsilon;
  ResampleSpec resample;
  TergOptions terg;
  StopParams stop;
  ModeThresholds modes;
  MargConfig marg;      // epsilon, stride, stop and modes are taken from the fields above
  bool marg_from_raw = false;
  FeatureWeights weights{0.4, 0.3, 0.2, 0.1, 2000.0, 7200.0, 15.0, 3600.0};
  FusionParams fusion;
  Aggregation aggregation;
  WlgPolicy wlg_policy;
  std::size_t top_k = 3;
  GraphFormat graph_format = GraphFormat::kBinary;
  bool dump_json = false;
  // Train/test boundary and local time offset; read from <root>/config.json
  // when not given.
  std::optional<std::int64_t> split_epoch;
  std::optional<std::int64_t> tz_offset_s;
  WorldConfig world;  // used by `simulate`

  void validate() const;
  MargConfig effective_marg() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class StageStatus : std::uint8_t { kRan, kSkipped };

struct StageResult {
  std::string stage;
  StageStatus status = StageStatus::kRan;
};

using LogFn = std::function<void(const std::string&)>;

// Each stage hashes its inputs and config; when <stage dir>/.stamp holds the
// same hash the stage is skipped. A stage that fails leaves `.incomplete` in
// its directory.
StageResult stage_build_terg(const PipelineConfig& cfg, const LogFn& log = {});
StageResult stage_build_marg(const PipelineConfig& cfg, const LogFn& log = {});
StageResult stage_score(const PipelineConfig& cfg, const LogFn& log = {});
StageResult stage_evaluate(const PipelineConfig& cfg, const LogFn& log = {});

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, const LogFn& log = {});

// Writes the synthetic dataset described by cfg.world under cfg.root.
void run_simulate(const PipelineConfig& cfg, const LogFn& log = {});

struct TuneResult {
  FeatureWeights weights;
  FusionParams fusion;
  double auc_pr = 0.0;
  double default_auc_pr = 0.0;
  std::size_t candidates = 0;
};

// Candidate grids searched by tune().
std::vector<double> tune_alpha_grid();
std::vector<FeatureWeights> tune_weight_grid(const FeatureWeights& base);

// Exhaustive search maximizing AUC-PR on the labeled dataset; the first
// candidate wins ties. Writes <root>/metrics/tuned.json. Needs built graphs.
TuneResult tune(const PipelineConfig& cfg, const std::vector<FeatureWeights>& weight_grid,
                const std::vector<double>& alpha_grid, const LogFn& log = {});

struct BenchRow {
  std::string stage;
  std::int64_t points = 0;
  double seconds = 0.0;
  double ratio = 0.0;  // seconds over the previous rung, 0 on the first
};

// Synthetic single-agent ladder: 10 daily tracks sharing P points. Each rung
// is timed `repeats` times after one warm-up run; the fastest sample is reported.
std::vector<BenchRow> bench(const std::vector<std::int64_t>& ladder, int repeats = 3,
                            std::uint64_t seed = 7);
std::string bench_csv(const std::vector<BenchRow>& rows);

// Synthetic tracks used by bench(): `n` walkers of `len` slots that drift in
// and out of each other's neighbourhoods.
std::vector<GridTrack> bench_tracks(std::size_t n, std::int64_t len, std::uint64_t seed);

}  // namespace polreeb
