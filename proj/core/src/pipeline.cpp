#include "polreeb/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <functional>
#include <numbers>
#include <random>

#include <openssl/evp.h>

#include "polreeb/dataset_io.hpp"
#include "polreeb/error.hpp"
#include "polreeb/worker_pool.hpp"

namespace polreeb {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_text(p)); }

// Hashes of many files, computed on the worker pool, joined in input order.
std::string files_digest(const std::vector<fs::path>& files, std::size_t workers) {
  std::vector<std::string> h(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) { h[i] = file_hash(files[i]); });
  std::string all;
  for (std::size_t i = 0; i < files.size(); ++i) all += files[i].filename().string() + '=' + h[i] + '\n';
  return sha256_hex(all);
}

class Stamp {
 public:
  Stamp(fs::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {}

  bool fresh() const {
    std::error_code ec;
    if (fs::exists(dir_ / ".incomplete", ec) || !fs::exists(dir_ / ".stamp", ec)) return false;
    return read_text(dir_ / ".stamp") == hash_ + '\n';
  }
  void begin() const {
    fs::create_directories(dir_);
    fs::remove(dir_ / ".stamp");
    write_text_atomic(dir_ / ".incomplete", "");
  }
  void commit() const {
    write_text_atomic(dir_ / ".stamp", hash_ + '\n');
    fs::remove(dir_ / ".incomplete");
  }

 private:
  fs::path dir_;
  std::string hash_;
};

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

template <class F>
StageResult run_stage(const std::string& name, const fs::path& dir, const std::string& hash, const LogFn& log, F&& body) {
  const Stamp stamp(dir, hash);
  try {
    if (stamp.fresh()) {
      say(log, name + ": up to date, skipped");
      return {name, StageStatus::kSkipped};
    }
    stamp.begin();
    body();
    stamp.commit();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  say(log, name + ": done");
  return {name, StageStatus::kRan};
}

std::vector<fs::path> graph_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".rg") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Split {
  std::int64_t split_epoch = 0;
  std::int64_t tz_offset_s = 0;
};

Split resolve_split(const PipelineConfig& cfg) {
  Split s;
  const fs::path world = cfg.root / "config.json";
  if (fs::exists(world)) {
    const WorldConfig w = json::parse(read_text(world)).get<WorldConfig>();
    s.split_epoch = w.split_epoch();
    s.tz_offset_s = w.tz_offset_s;
  } else if (!cfg.split_epoch) {
    throw Error("no split_epoch configured and no " + world.string());
  }
  if (cfg.split_epoch) s.split_epoch = *cfg.split_epoch;
  if (cfg.tz_offset_s) s.tz_offset_s = *cfg.tz_offset_s;
  return s;
}

std::pair<std::vector<GridTrack>, std::vector<GridTrack>> agent_tracks(const PipelineConfig& cfg,
                                                                       const std::string& agent,
                                                                       const Split& split) {
  const AgentTrajectory traj = read_agent_csv(agent_csv_path(cfg.root, agent));
  std::vector<GridTrack> train, test;
  for (const SubTrajectory& st : segment_daily(traj, split.tz_offset_s)) {
    (st.day_start < split.split_epoch ? train : test).push_back(resample(st, cfg.resample));
  }
  return {std::move(train), std::move(test)};
}

json weights_json(const FeatureWeights& w) {
  return {{"w_dist", w.w_dist},           {"w_stop", w.w_stop},
          {"w_vel", w.w_vel},             {"w_mode", w.w_mode},
          {"dist_scale_m", w.dist_scale_m}, {"stop_scale_s", w.stop_scale_s},
          {"vel_scale_mps", w.vel_scale_mps}, {"time_slack_s", w.time_slack_s}};
}

std::string metric_name(Metric m) { return m == Metric::kHaversine ? "haversine" : "euclidean_deg"; }

// Graphs and indices needed to score every test agent.
struct ScoringInputs {
  std::vector<std::string> agents;          // agents with a test graph, sorted
  std::vector<ReebGraph> train, test;
  std::vector<ReferenceIndex> train_index;
  ReebGraph marg;
  std::unique_ptr<ReferenceIndex> marg_index;
};

ScoringInputs load_scoring_inputs(const PipelineConfig& cfg, const LogFn& log) {
  ScoringInputs in;
  for (const fs::path& p : graph_files(cfg.root / "terg" / "test")) in.agents.push_back(p.stem().string());
  if (in.agents.empty()) throw Error("no test graphs under " + (cfg.root / "terg" / "test").string());
  in.marg = load_graph(cfg.root / "marg" / "model.rg");
  in.marg_index = std::make_unique<ReferenceIndex>(in.marg);
  if (in.marg_index->eligible() == 0) say(log, "warning: population graph has no eligible nodes");
  const std::size_t n = in.agents.size();
  in.train.resize(n);
  in.test.resize(n);
  std::vector<std::unique_ptr<ReferenceIndex>> idx(n);
  std::vector<std::uint8_t> missing(n, 0);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    in.test[i] = load_graph(cfg.root / "terg" / "test" / (in.agents[i] + ".rg"));
    const fs::path train = cfg.root / "terg" / (in.agents[i] + ".rg");
    if (fs::exists(train)) {
      in.train[i] = load_graph(train);
      require_same_agent(in.test[i], in.train[i]);
    } else {
      missing[i] = 1;
    }
    idx[i] = std::make_unique<ReferenceIndex>(in.train[i]);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (missing[i]) say(log, "warning: " + in.agents[i] + " has no training graph; scored as novel");
    in.train_index.push_back(std::move(*idx[i]));
  }
  return in;
}

}  // namespace

StageError::StageError(std::string stage, const std::string& cause)
    : Error("stage " + stage + " failed: " + cause), stage_(std::move(stage)) {}

void PipelineConfig::validate() const {
  if (workers < 1) throw Error("workers must be >= 1");
  epsilon.validate();
  resample.validate();
  stop.validate();
  if (terg.rep_stride_s < 1) throw Error("rep_stride_s must be >= 1");
  effective_marg().validate();
  weights.validate();
  fusion.validate();
  if (aggregation.k < 1) throw Error("aggregation k must be >= 1");
  if (top_k < 1) throw Error("top_k must be >= 1");
}

MargConfig PipelineConfig::effective_marg() const {
  MargConfig m = marg;
  m.epsilon = epsilon;
  m.stride_s = resample.stride_s;
  m.stop = stop;
  m.modes = modes;
  if (marg_from_raw) m.stop_gate_s = 0.0;
  return m;
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{
      {"root", c.root.string()},
      {"workers", c.workers},
      {"epsilon", c.epsilon.epsilon},
      {"metric", metric_name(c.epsilon.metric)},
      {"stride_s", c.resample.stride_s},
      {"max_gap_s", c.resample.max_gap_s},
      {"rep_stride_s", c.terg.rep_stride_s},
      {"stop", {{"v_stop_mps", c.stop.v_stop_mps}, {"min_stop_s", c.stop.min_stop_s}, {"stop_radius_m", c.stop.stop_radius_m}}},
      {"modes", {{"walk_max_mps", c.modes.walk_max_mps}, {"bike_max_mps", c.modes.bike_max_mps}}},
      {"marg",
       {{"initial_cohort_M", c.marg.initial_cohort_M},
        {"min_support", c.marg.min_support},
        {"stop_gate_s", c.marg.stop_gate_s},
        {"from_raw", c.marg_from_raw}}},
      {"weights", weights_json(c.weights)},
      {"fusion", {{"alpha", c.fusion.alpha}, {"beta", c.fusion.beta}}},
      {"aggregation", {{"method", c.aggregation.kind == Aggregation::Kind::kMax ? "max" : "mean_top_k"}, {"k", c.aggregation.k}}},
      {"wlg_policy",
       {{"kind", c.wlg_policy.kind == WlgPolicy::Kind::kTopN        ? "top_n"
                 : c.wlg_policy.kind == WlgPolicy::Kind::kThreshold ? "threshold"
                                                                    : "hybrid"},
        {"n", c.wlg_policy.n},
        {"theta", c.wlg_policy.theta}}},
      {"top_k", c.top_k},
      {"graph_format", c.graph_format == GraphFormat::kBinary ? "binary" : "json"},
      {"dump_json", c.dump_json},
      {"world", c.world},
  };
  if (c.split_epoch) j["split_epoch"] = *c.split_epoch;
  if (c.tz_offset_s) j["tz_offset_s"] = *c.tz_offset_s;
}

void from_json(const json& j, PipelineConfig& c) {
  auto opt = [](const json& o, const char* key, auto& v) {
    if (o.contains(key)) o.at(key).get_to(v);
  };
  if (j.contains("root")) c.root = j.at("root").get<std::string>();
  opt(j, "workers", c.workers);
  opt(j, "epsilon", c.epsilon.epsilon);
  if (j.contains("metric")) {
    const std::string m = j.at("metric").get<std::string>();
    if (m == "haversine") c.epsilon.metric = Metric::kHaversine;
    else if (m == "euclidean_deg") c.epsilon.metric = Metric::kEuclideanDeg;
    else throw Error("unknown metric '" + m + "'");
  }
  opt(j, "stride_s", c.resample.stride_s);
  opt(j, "max_gap_s", c.resample.max_gap_s);
  opt(j, "rep_stride_s", c.terg.rep_stride_s);
  if (j.contains("stop")) {
    const json& s = j.at("stop");
    opt(s, "v_stop_mps", c.stop.v_stop_mps);
    opt(s, "min_stop_s", c.stop.min_stop_s);
    opt(s, "stop_radius_m", c.stop.stop_radius_m);
  }
  if (j.contains("modes")) {
    opt(j.at("modes"), "walk_max_mps", c.modes.walk_max_mps);
    opt(j.at("modes"), "bike_max_mps", c.modes.bike_max_mps);
  }
  if (j.contains("marg")) {
    const json& m = j.at("marg");
    opt(m, "initial_cohort_M", c.marg.initial_cohort_M);
    opt(m, "min_support", c.marg.min_support);
    opt(m, "stop_gate_s", c.marg.stop_gate_s);
    opt(m, "from_raw", c.marg_from_raw);
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    opt(w, "w_dist", c.weights.w_dist);
    opt(w, "w_stop", c.weights.w_stop);
    opt(w, "w_vel", c.weights.w_vel);
    opt(w, "w_mode", c.weights.w_mode);
    opt(w, "dist_scale_m", c.weights.dist_scale_m);
    opt(w, "stop_scale_s", c.weights.stop_scale_s);
    opt(w, "vel_scale_mps", c.weights.vel_scale_mps);
    opt(w, "time_slack_s", c.weights.time_slack_s);
  }
  if (j.contains("fusion")) {
    opt(j.at("fusion"), "alpha", c.fusion.alpha);
    opt(j.at("fusion"), "beta", c.fusion.beta);
  }
  if (j.contains("aggregation")) {
    const json& a = j.at("aggregation");
    if (a.contains("method")) {
      const std::string m = a.at("method").get<std::string>();
      if (m == "max") c.aggregation.kind = Aggregation::Kind::kMax;
      else if (m == "mean_top_k") c.aggregation.kind = Aggregation::Kind::kMeanTopK;
      else throw Error("unknown aggregation '" + m + "'");
    }
    opt(a, "k", c.aggregation.k);
  }
  if (j.contains("wlg_policy")) {
    const json& p = j.at("wlg_policy");
    if (p.contains("kind")) {
      const std::string k = p.at("kind").get<std::string>();
      if (k == "top_n") c.wlg_policy.kind = WlgPolicy::Kind::kTopN;
      else if (k == "threshold") c.wlg_policy.kind = WlgPolicy::Kind::kThreshold;
      else if (k == "hybrid") c.wlg_policy.kind = WlgPolicy::Kind::kHybrid;
      else throw Error("unknown wlg policy '" + k + "'");
    }
    opt(p, "n", c.wlg_policy.n);
    opt(p, "theta", c.wlg_policy.theta);
  }
  opt(j, "top_k", c.top_k);
  if (j.contains("graph_format")) {
    const std::string f = j.at("graph_format").get<std::string>();
    if (f == "binary") c.graph_format = GraphFormat::kBinary;
    else if (f == "json") c.graph_format = GraphFormat::kJson;
    else throw Error("unknown graph_format '" + f + "'");
  }
  opt(j, "dump_json", c.dump_json);
  if (j.contains("split_epoch")) c.split_epoch = j.at("split_epoch").get<std::int64_t>();
  if (j.contains("tz_offset_s")) c.tz_offset_s = j.at("tz_offset_s").get<std::int64_t>();
  if (j.contains("world")) j.at("world").get_to(c.world);
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  try {
    return json::parse(read_text(path)).get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void run_simulate(const PipelineConfig& cfg, const LogFn& log) {
  say(log, "simulate: generating " + std::to_string(cfg.world.n_agents) + " agents");
  const Dataset ds = simulate(cfg.world, cfg.workers);
  write_dataset(ds, cfg.root, cfg.workers);
  say(log, "simulate: wrote " + cfg.root.string());
}

StageResult stage_build_terg(const PipelineConfig& cfg, const LogFn& log) {
  const std::string name = "build-terg";
  std::vector<std::string> agents;
  Split split;
  std::string hash;
  try {
    cfg.validate();
    agents = list_agents(cfg.root);
    split = resolve_split(cfg);
    std::vector<fs::path> inputs;
    for (const auto& a : agents) inputs.push_back(agent_csv_path(cfg.root, a));
    const json knobs = {{"epsilon", cfg.epsilon.epsilon}, {"metric", metric_name(cfg.epsilon.metric)},
                        {"stride_s", cfg.resample.stride_s}, {"max_gap_s", cfg.resample.max_gap_s},
                        {"rep_stride_s", cfg.terg.rep_stride_s}, {"split", split.split_epoch},
                        {"tz", split.tz_offset_s}, {"stop", json(cfg)["stop"]}, {"modes", json(cfg)["modes"]},
                        {"format", cfg.graph_format == GraphFormat::kBinary}, {"dump_json", cfg.dump_json}};
    hash = sha256_hex(name + knobs.dump() + files_digest(inputs, cfg.workers));
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  const fs::path dir = cfg.root / "terg";
  return run_stage(name, dir, hash, log, [&] {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().filename() != ".incomplete") fs::remove_all(e.path());
    }
    fs::create_directories(dir / "test");
    parallel_for(agents.size(), cfg.workers, [&](std::size_t i) {
      auto [train, test] = agent_tracks(cfg, agents[i], split);
      auto emit = [&](const std::vector<GridTrack>& tracks, const fs::path& base) {
        if (tracks.empty()) return;
        const ReebGraph g = annotate_features(build_terg(tracks, cfg.epsilon, cfg.terg), tracks, cfg.stop, cfg.modes);
        save_graph(base.string() + ".rg", g, cfg.graph_format);
        if (cfg.dump_json) save_graph(base.string() + ".json", g, GraphFormat::kJson);
      };
      emit(train, dir / agents[i]);
      emit(test, dir / "test" / agents[i]);
    });
    say(log, name + ": " + std::to_string(agents.size()) + " agents");
  });
}

StageResult stage_build_marg(const PipelineConfig& cfg, const LogFn& log) {
  const std::string name = "build-marg";
  std::vector<fs::path> inputs;
  std::string hash;
  Split split;
  try {
    cfg.validate();
    inputs = graph_files(cfg.root / "terg");
    if (inputs.empty()) throw Error("no agent graphs under " + (cfg.root / "terg").string() + "; run build-terg first");
    json knobs = json(cfg)["marg"];
    knobs["eps"] = cfg.epsilon.epsilon;
    knobs["dump_json"] = cfg.dump_json;
    std::string digest = files_digest(inputs, cfg.workers);
    if (cfg.marg_from_raw) {
      split = resolve_split(cfg);
      std::vector<fs::path> csvs;
      for (const auto& p : inputs) csvs.push_back(agent_csv_path(cfg.root, p.stem().string()));
      digest += files_digest(csvs, cfg.workers);
    }
    hash = sha256_hex(name + knobs.dump() + digest);
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  return run_stage(name, cfg.root / "marg", hash, log, [&] {
    const MargConfig mc = cfg.effective_marg();
    std::vector<AgentContribution> contrib(inputs.size());
    parallel_for(inputs.size(), cfg.workers, [&](std::size_t i) {
      const std::string agent = inputs[i].stem().string();
      contrib[i].agent_id = agent;
      if (cfg.marg_from_raw) {
        contrib[i].tracks = raw_contribution(agent_tracks(cfg, agent, split).first);
      } else {
        contrib[i].tracks = gate_nodes(load_graph(inputs[i]), mc.stop_gate_s, mc.stride_s);
      }
    });
    std::size_t pseudo = 0;
    for (const auto& c : contrib) pseudo += c.tracks.size();
    say(log, name + ": " + std::to_string(pseudo) + " pseudo-tracks from " + std::to_string(contrib.size()) + " agents");
    const ReebGraph g = build_marg(contrib, mc);
    save_graph(cfg.root / "marg" / "model.rg", g, cfg.graph_format);
    if (cfg.dump_json) save_graph(cfg.root / "marg" / "model.json", g, GraphFormat::kJson);
    std::ostringstream stats;
    write_marg_stats(stats, g);
    write_text_atomic(cfg.root / "marg" / "stats.csv", stats.str());
    say(log, name + ": " + std::to_string(g.nodes.size()) + " nodes");
  });
}

StageResult stage_score(const PipelineConfig& cfg, const LogFn& log) {
  const std::string name = "score";
  std::string hash;
  try {
    cfg.validate();
    std::vector<fs::path> inputs = graph_files(cfg.root / "terg");
    const auto tests = graph_files(cfg.root / "terg" / "test");
    inputs.insert(inputs.end(), tests.begin(), tests.end());
    inputs.push_back(cfg.root / "marg" / "model.rg");
    inputs.push_back(cfg.root / "wlg" / "groups.csv");
    for (const auto& p : inputs) {
      if (!fs::exists(p)) throw Error("missing input " + p.string());
    }
    const json full = cfg;
    const json knobs = {full["weights"], full["fusion"], full["aggregation"], full["wlg_policy"], full["top_k"]};
    hash = sha256_hex(name + knobs.dump() + files_digest(inputs, cfg.workers));
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  return run_stage(name, cfg.root / "detections", hash, log, [&] {
    const ScoringInputs in = load_scoring_inputs(cfg, log);
    const std::size_t n = in.agents.size();
    std::vector<AgentScore> scores(n);
    std::vector<std::string> detail(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      const auto ns = score_test_graph(in.test[i], in.train_index[i], *in.marg_index, cfg.fusion, cfg.weights);
      scores[i] = summarize_agent(in.agents[i], in.test[i], ns, cfg.aggregation, cfg.top_k);
      json nodes = json::array();
      for (const NodeScore& s : ns) {
        const ReebNode& node = in.test[i].nodes[s.node];
        nodes.push_back({{"node", s.node},
                         {"t_start", node.t_start},
                         {"t_end", node.t_end},
                         {"lat", node.features->anchor.lat_deg},
                         {"lon", node.features->anchor.lon_deg},
                         {"s_agent", s.s_agent},
                         {"s_pop", s.s_pop},
                         {"s_combined", s.s_combined},
                         {"nearest_train", s.nearest_train},
                         {"nearest_marg", s.nearest_marg}});
      }
      detail[i] = json{{"agent_id", in.agents[i]}, {"score", scores[i].score}, {"nodes", nodes}}.dump() + '\n';
    });
    const WlgAssignment wlg = read_wlg_csv(cfg.root / "wlg" / "groups.csv");
    const auto det = apply_wlg_filter(scores, wlg, cfg.wlg_policy);
    std::string csv = "agent_id,score,flagged,top_node_time,top_node_lat,top_node_lon\n";
    for (const AgentDetection& d : det) {
      csv += d.agent_id + ',' + format_double(d.agent_score) + ',' + (d.flagged ? "1" : "0") + ',';
      if (d.top_nodes.empty()) {
        csv += ",,\n";
      } else {
        const TopNode& t = d.top_nodes.front();
        csv += std::to_string(t.time) + ',' + format_double(t.location.lat_deg) + ',' +
               format_double(t.location.lon_deg) + '\n';
      }
    }
    std::string jsonl;
    for (const auto& line : detail) jsonl += line;
    write_text_atomic(cfg.root / "detections" / "detections.csv", csv);
    write_text_atomic(cfg.root / "detections" / "nodes.jsonl", jsonl);
    say(log, name + ": " + std::to_string(n) + " agents scored");
  });
}

namespace {

std::vector<AgentDetection> read_detections(const fs::path& path) {
  std::vector<AgentDetection> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (no == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() < 3) throw IngestError(path, {{no, "expected agent_id,score,flagged,..."}});
    AgentDetection d;
    d.agent_id = f[0];
    try {
      d.agent_score = std::stod(f[1]);
    } catch (const std::exception&) {
      throw IngestError(path, {{no, "bad score"}});
    }
    d.flagged = f[2] == "1";
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

StageResult stage_evaluate(const PipelineConfig& cfg, const LogFn& log) {
  const std::string name = "evaluate";
  const fs::path det_path = cfg.root / "detections" / "detections.csv";
  const fs::path truth_path = cfg.root / "truth" / "anomalous_agents.csv";
  const fs::path wlg_path = cfg.root / "wlg" / "groups.csv";
  std::string hash;
  try {
    for (const auto& p : {det_path, truth_path, wlg_path}) {
      if (!fs::exists(p)) throw Error("missing input " + p.string());
    }
    hash = sha256_hex(name + files_digest({det_path, truth_path, wlg_path}, 1));
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  return run_stage(name, cfg.root / "metrics", hash, log, [&] {
    const auto det = read_detections(det_path);
    const auto anomalous_list = read_id_list(truth_path);
    const std::set<std::string> anomalous(anomalous_list.begin(), anomalous_list.end());
    const WlgAssignment wlg = read_wlg_csv(wlg_path);
    LabeledScores ls;
    std::size_t flagged = 0, true_flagged = 0;
    for (const AgentDetection& d : det) {
      ls.agent_ids.push_back(d.agent_id);
      ls.scores.push_back(d.agent_score);
      const bool pos = anomalous.contains(d.agent_id);
      ls.labels.push_back(pos ? Label::kAnomalous : Label::kNormal);
      flagged += d.flagged;
      true_flagged += d.flagged && pos;
    }
    json m = {{"n_agents", det.size()},
              {"n_anomalous", ls.positives()},
              {"n_flagged", flagged},
              {"n_true_flagged", true_flagged}};
    std::string curve_csv = "threshold,precision,recall\n";
    if (!det.empty() && ls.positives() > 0) {
      const auto curve = pr_curve(ls);
      const F1Point best = best_f1(curve);
      m["auc_pr"] = auc_pr(ls);
      m["best_f1"] = best.f1;
      m["precision"] = best.precision;
      m["recall"] = best.recall;
      m["threshold"] = best.threshold;
      for (const PrPoint& p : curve) {
        curve_csv += format_double(p.threshold) + ',' + format_double(p.precision) + ',' + format_double(p.recall) + '\n';
      }
    } else {
      for (const char* k : {"auc_pr", "best_f1", "precision", "recall", "threshold"}) m[k] = nullptr;
      say(log, "warning: no labeled anomalies among scored agents; curve metrics undefined");
    }
    const WlgReport rep = wlg_flag_report(det, wlg, anomalous);
    m["groups_with_flags"] = rep.groups_with_flags;
    m["groups_with_anomaly"] = rep.groups_with_anomaly;
    std::string wlg_csv = "group_id,size,flagged,has_true_anomaly\n";
    for (const WlgRow& r : rep.rows) {
      wlg_csv += r.group_id + ',' + std::to_string(r.size) + ',' + std::to_string(r.flagged) + ',' +
                 (r.has_true_anomaly ? "1" : "0") + '\n';
    }
    write_text_atomic(cfg.root / "metrics" / "metrics.json", m.dump(2) + '\n');
    write_text_atomic(cfg.root / "metrics" / "pr_curve.csv", curve_csv);
    write_text_atomic(cfg.root / "metrics" / "wlg_report.csv", wlg_csv);
    if (!m["auc_pr"].is_null()) {
      say(log, name + ": auc_pr " + format_double(m["auc_pr"].get<double>()) + ", flagged " +
                   std::to_string(true_flagged) + "/" + std::to_string(ls.positives()) + " anomalous");
    }
  });
}

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, const LogFn& log) {
  return {stage_build_terg(cfg, log), stage_build_marg(cfg, log), stage_score(cfg, log), stage_evaluate(cfg, log)};
}

std::vector<double> tune_alpha_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

std::vector<FeatureWeights> tune_weight_grid(const FeatureWeights& base) {
  std::vector<FeatureWeights> out{base};
  for (double d : {0.2, 0.4, 0.6, 0.8}) {
    for (double s : {0.0, 0.2, 0.4}) {
      if (d + s > 1.0 + 1e-12) continue;
      const double rest = std::max(0.0, 1.0 - d - s);
      FeatureWeights w = base;
      w.w_dist = d;
      w.w_stop = s;
      w.w_vel = rest / 2.0;
      w.w_mode = 1.0 - d - s - w.w_vel;
      if (std::abs(w.w_mode) < 1e-15) w.w_mode = 0.0;
      out.push_back(w);
    }
  }
  return out;
}

TuneResult tune(const PipelineConfig& cfg, const std::vector<FeatureWeights>& weight_grid,
                const std::vector<double>& alpha_grid, const LogFn& log) {
  cfg.validate();
  if (weight_grid.empty() || alpha_grid.empty()) throw Error("empty tuning grid");
  const ScoringInputs in = load_scoring_inputs(cfg, log);
  const auto anomalous_list = read_id_list(cfg.root / "truth" / "anomalous_agents.csv");
  const std::set<std::string> anomalous(anomalous_list.begin(), anomalous_list.end());
  LabeledScores ls;
  ls.agent_ids = in.agents;
  for (const auto& a : in.agents) ls.labels.push_back(anomalous.contains(a) ? Label::kAnomalous : Label::kNormal);
  if (ls.positives() == 0) throw Error("undefined recall");

  const std::size_t n = in.agents.size();
  auto evaluate = [&](const FeatureWeights& w, const std::vector<double>& alphas) {
    std::vector<std::vector<NodeScore>> per_agent(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      per_agent[i] = score_test_graph(in.test[i], in.train_index[i], *in.marg_index, FusionParams{}, w);
    });
    std::vector<double> aps;
    for (double a : alphas) {
      LabeledScores cur = ls;
      cur.scores.clear();
      for (auto& ns : per_agent) {
        for (NodeScore& s : ns) s.s_combined = a * s.s_agent + (1.0 - a) * s.s_pop;
        cur.scores.push_back(aggregate_agent(ns, cfg.aggregation));
      }
      aps.push_back(auc_pr(cur));
    }
    return aps;
  };

  TuneResult best;
  best.default_auc_pr = evaluate(cfg.weights, {cfg.fusion.alpha}).front();
  bool have = false;
  for (const FeatureWeights& w : weight_grid) {
    w.validate();
    const auto aps = evaluate(w, alpha_grid);
    for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
      ++best.candidates;
      if (!have || aps[k] > best.auc_pr) {
        best.auc_pr = aps[k];
        best.weights = w;
        best.fusion = {alpha_grid[k], 1.0 - alpha_grid[k]};
        have = true;
      }
    }
  }
  json out = {{"weights", weights_json(best.weights)},
              {"fusion", {{"alpha", best.fusion.alpha}, {"beta", best.fusion.beta}}},
              {"auc_pr", best.auc_pr},
              {"default_auc_pr", best.default_auc_pr},
              {"candidates", best.candidates}};
  write_text_atomic(cfg.root / "metrics" / "tuned.json", out.dump(2) + '\n');
  say(log, "tune: best auc_pr " + format_double(best.auc_pr) + " over " + std::to_string(best.candidates) +
               " candidates (default " + format_double(best.default_auc_pr) + ")");
  return best;
}

std::vector<GridTrack> bench_tracks(std::size_t n, std::int64_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> period(40.0, 160.0);
  const GeoPoint center{40.05, -75.05};
  std::vector<GridTrack> out;
  for (std::size_t i = 0; i < n; ++i) {
    GridTrack t;
    t.agent_id = "bench";
    t.day_index = static_cast<std::int32_t>(i);
    t.stride_s = 60;
    const double ph = phase(rng), per = period(rng);
    t.pos.reserve(static_cast<std::size_t>(len));
    for (std::int64_t k = 0; k < len; ++k) {
      // Everyone circles the same loop; lateral offsets swing them together and apart.
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k % 1440) / 1440.0;
      const double lateral = 120.0 * std::sin(ph + 2.0 * std::numbers::pi * static_cast<double>(k) / per);
      const double r = 1500.0 + lateral;
      t.pos.push_back(offset_m(center, r * std::cos(angle), r * std::sin(angle)));
    }
    t.present.assign(t.pos.size(), 1);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<BenchRow> bench(const std::vector<std::int64_t>& ladder, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw Error("repeats must be >= 1");
  using clock = std::chrono::steady_clock;
  const EpsilonConfig eps;
  MargConfig mc;
  mc.stop_gate_s = 0.0;
  std::vector<BenchRow> rows;
  std::map<std::string, double> prev;
  for (std::int64_t points : ladder) {
    if (points < 10) throw Error("ladder rungs must be >= 10 points");
    const auto tracks = bench_tracks(10, points / 10, seed);
    auto time_terg = [&] {
      const auto t0 = clock::now();
      const ReebGraph g = annotate_features(build_terg(tracks, eps), tracks, StopParams{});
      const auto t1 = clock::now();
      if (g.nodes.empty()) throw Error("bench produced an empty graph");
      return std::chrono::duration<double>(t1 - t0).count();
    };
    const std::vector<GridTrack> others(tracks.begin() + 1, tracks.end());
    const std::vector<AgentContribution> cohort{{"bench", raw_contribution(others)}};
    const ReebGraph base = build_initial_marg(cohort, mc);
    const PseudoTrack newcomer = raw_contribution(std::span(tracks).first(1)).front();
    auto time_update = [&] {
      ReebGraph copy = base;
      const auto t0 = clock::now();
      const ReebGraph g = update_reeb(std::move(copy), newcomer, mc);
      const auto t1 = clock::now();
      if (g.nodes.empty()) throw Error("bench produced an empty graph");
      return std::chrono::duration<double>(t1 - t0).count();
    };
    // Small rungs repeat the call so each sample covers about a million points.
    const std::int64_t iters = std::max<std::int64_t>(1, 1'000'000 / points);
    for (const auto& [stage, fn] : std::vector<std::pair<std::string, std::function<double()>>>{
             {"terg_build", time_terg}, {"marg_update", time_update}}) {
      (void)fn();  // warm-up
      std::vector<double> runs;
      for (int r = 0; r < repeats; ++r) {
        double total = 0.0;
        for (std::int64_t k = 0; k < iters; ++k) total += fn();
        runs.push_back(total / static_cast<double>(iters));
      }
      BenchRow row{stage, points, *std::min_element(runs.begin(), runs.end()), 0.0};
      if (prev.contains(stage)) row.ratio = row.seconds / prev[stage];
      prev[stage] = row.seconds;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "stage,points,seconds,ratio\n";
  for (const BenchRow& r : rows) {
    out += r.stage + ',' + std::to_string(r.points) + ',' + format_double(r.seconds) + ',' + format_double(r.ratio) + '\n';
  }
  return out;
}

}  // namespace polreeb
