#include <benchmark/benchmark.h>

#include <random>

#include "polreeb/events.hpp"
#include "polreeb/features.hpp"
#include "polreeb/marg.hpp"
#include "polreeb/pipeline.hpp"
#include "polreeb/scoring.hpp"
#include "polreeb/terg.hpp"

using namespace polreeb;

namespace {

void BM_Haversine(benchmark::State& state) {
  const GeoPoint a{40.0, -75.0}, b{40.01, -75.02};
  for (auto _ : state) benchmark::DoNotOptimize(haversine_m(a, b));
}
BENCHMARK(BM_Haversine);

void BM_SnapshotGraph(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::pair<TrackId, GeoPoint>> pts;
  for (TrackId i = 0; i < state.range(0); ++i) pts.emplace_back(i, offset_m({40.0, -75.0}, u(rng) * 2000, u(rng) * 2000));
  const EpsilonConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(snapshot_graph(0, pts, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SnapshotGraph)->Arg(100)->Arg(1000)->Arg(10000);

void BM_BundleTimeline(benchmark::State& state) {
  const auto tracks = bench_tracks(10, state.range(0), 7);
  const EpsilonConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(bundle_timeline(tracks, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}
BENCHMARK(BM_BundleTimeline)->Arg(1000)->Arg(10000);

void BM_BuildTerg(benchmark::State& state) {
  const auto tracks = bench_tracks(10, state.range(0), 7);
  const EpsilonConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(annotate_features(build_terg(tracks, cfg), tracks, StopParams{}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 10);
}
BENCHMARK(BM_BuildTerg)->Arg(1000)->Arg(10000);

void BM_UpdateReeb(benchmark::State& state) {
  const auto tracks = bench_tracks(10, state.range(0), 7);
  MargConfig cfg;
  cfg.stop_gate_s = 0.0;
  std::vector<AgentContribution> cohort{{"bench", raw_contribution(std::span(tracks).subspan(1))}};
  const ReebGraph base = build_initial_marg(cohort, cfg);
  const PseudoTrack t = raw_contribution(std::span(tracks).first(1)).front();
  for (auto _ : state) benchmark::DoNotOptimize(update_reeb(base, t, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UpdateReeb)->Arg(1000)->Arg(10000);

void BM_ScoreGraph(benchmark::State& state) {
  const auto tracks = bench_tracks(10, 1440, 7);
  const EpsilonConfig eps;
  const ReebGraph train = annotate_features(build_terg(std::span(tracks).subspan(2), eps), std::span(tracks).subspan(2), StopParams{});
  const ReebGraph test = annotate_features(build_terg(std::span(tracks).first(2), eps), std::span(tracks).first(2), StopParams{});
  const ReferenceIndex a(train), p(train);
  const PipelineConfig defaults;
  for (auto _ : state) benchmark::DoNotOptimize(score_test_graph(test, a, p, FusionParams{}, defaults.weights));
}
BENCHMARK(BM_ScoreGraph);

}  // namespace

BENCHMARK_MAIN();
