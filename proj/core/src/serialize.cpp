#include "polreeb/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "polreeb/error.hpp"

namespace polreeb {
namespace {

constexpr char kMagic[4] = {'P', 'R', 'B', 'G'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { need(1); return b_[pos_++]; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Element counts are bounded by the remaining bytes so corrupt lengths
  // cannot trigger huge allocations.
  std::uint32_t count(std::size_t min_bytes_each) {
    const std::uint32_t n = u32();
    if (min_bytes_each > 0 && n > remaining() / min_bytes_each) throw FormatError("corrupt payload");
    return n;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw FormatError("corrupt payload");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

void write_payload(Writer& w, const ReebGraph& g) {
  w.u8(static_cast<std::uint8_t>(g.kind));
  w.f64(g.epsilon.epsilon);
  w.u8(static_cast<std::uint8_t>(g.epsilon.metric));
  w.i64(g.stride_s);
  w.i64(g.rep_stride_s);
  w.u32(static_cast<std::uint32_t>(g.tracks.size()));
  for (const TrackInfo& t : g.tracks) {
    w.str(t.agent_id);
    w.i32(t.day_index);
    w.i64(t.day_start);
    w.i64(t.source_node);
  }
  w.u32(static_cast<std::uint32_t>(g.nodes.size()));
  for (const ReebNode& n : g.nodes) {
    w.u32(n.id);
    w.u32(static_cast<std::uint32_t>(n.members.size()));
    for (TrackId m : n.members) w.u32(m);
    w.i64(n.t_start);
    w.i64(n.t_end);
    w.u32(static_cast<std::uint32_t>(n.centroid_path.size()));
    for (const TimedPoint& p : n.centroid_path) {
      w.i64(p.t);
      w.f64(p.pos.lat_deg);
      w.f64(p.pos.lon_deg);
    }
    w.u8(n.features ? 1 : 0);
    if (n.features) {
      const NodeFeatures& f = *n.features;
      w.f64(f.max_stop_duration_s);
      w.f64(f.max_velocity_mps);
      w.u8(f.modes.bits);
      w.u8(f.mean_bearing_deg ? 1 : 0);
      w.f64(f.mean_bearing_deg.value_or(0.0));
      w.f64(f.anchor.lat_deg);
      w.f64(f.anchor.lon_deg);
      w.f64(f.dwell_total_s);
    }
    w.u32(n.support);
    w.u8(n.low_support ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(g.edges.size()));
  for (const ReebEdge& e : g.edges) {
    w.u32(e.from);
    w.u32(e.to);
    w.u32(static_cast<std::uint32_t>(e.carried.size()));
    for (TrackId m : e.carried) w.u32(m);
  }
}

ReebGraph read_payload(Reader& r) {
  ReebGraph g;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw FormatError("corrupt payload");
  g.kind = static_cast<GraphKind>(kind);
  g.epsilon.epsilon = r.f64();
  const std::uint8_t metric = r.u8();
  if (metric > 1) throw FormatError("corrupt payload");
  g.epsilon.metric = static_cast<Metric>(metric);
  g.stride_s = r.i64();
  g.rep_stride_s = r.i64();
  g.tracks.resize(r.count(24));
  for (TrackInfo& t : g.tracks) {
    t.agent_id = r.str();
    t.day_index = r.i32();
    t.day_start = r.i64();
    t.source_node = r.i64();
  }
  g.nodes.resize(r.count(30));
  for (ReebNode& n : g.nodes) {
    n.id = r.u32();
    n.members.resize(r.count(4));
    for (TrackId& m : n.members) m = r.u32();
    n.t_start = r.i64();
    n.t_end = r.i64();
    n.centroid_path.resize(r.count(24));
    for (TimedPoint& p : n.centroid_path) {
      p.t = r.i64();
      p.pos.lat_deg = r.f64();
      p.pos.lon_deg = r.f64();
    }
    if (r.u8()) {
      NodeFeatures f;
      f.max_stop_duration_s = r.f64();
      f.max_velocity_mps = r.f64();
      f.modes.bits = r.u8();
      const bool has_bearing = r.u8() != 0;
      const double bearing = r.f64();
      if (has_bearing) f.mean_bearing_deg = bearing;
      f.anchor.lat_deg = r.f64();
      f.anchor.lon_deg = r.f64();
      f.dwell_total_s = r.f64();
      n.features = f;
    }
    n.support = r.u32();
    n.low_support = r.u8() != 0;
  }
  g.edges.resize(r.count(12));
  for (ReebEdge& e : g.edges) {
    e.from = r.u32();
    e.to = r.u32();
    e.carried.resize(r.count(4));
    for (TrackId& m : e.carried) m = r.u32();
  }
  if (r.remaining() != 0) throw FormatError("corrupt payload");
  return g;
}

}  // namespace

std::vector<std::uint8_t> serialize(const ReebGraph& g) {
  if (g.nodes.empty()) throw Error("empty graph not serializable");
  Writer payload;
  write_payload(payload, g);
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(kGraphFormatVersion);
  out.u64(payload.bytes().size());
  auto& bytes = out.bytes();
  bytes.insert(bytes.end(), payload.bytes().begin(), payload.bytes().end());
  out.u32(crc_of(payload.bytes()));
  return std::move(out.bytes());
}

ReebGraph deserialize(std::span<const std::uint8_t> bytes) {
  Reader head(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("corrupt payload");
  for (int i = 0; i < 4; ++i) head.u8();
  if (head.u32() != kGraphFormatVersion) throw FormatError("version mismatch");
  const std::uint64_t len = head.u64();
  if (len + 4 != head.remaining()) throw FormatError("corrupt payload");
  const auto payload = bytes.subspan(16, static_cast<std::size_t>(len));
  Reader tail(bytes.subspan(16 + static_cast<std::size_t>(len)));
  if (tail.u32() != crc_of(payload)) throw FormatError("corrupt payload");
  Reader r(payload);
  return read_payload(r);
}

nlohmann::json to_json(const ReebGraph& g) {
  using nlohmann::json;
  json j;
  j["format_version"] = kGraphFormatVersion;
  j["kind"] = g.kind == GraphKind::kAgentTerg ? "agent-terg" : "population-marg";
  j["epsilon"] = g.epsilon.epsilon;
  j["metric"] = g.epsilon.metric == Metric::kHaversine ? "haversine" : "euclidean_deg";
  j["stride_s"] = g.stride_s;
  j["rep_stride_s"] = g.rep_stride_s;
  json tracks = json::array();
  for (const TrackInfo& t : g.tracks) {
    tracks.push_back({{"agent_id", t.agent_id}, {"day_index", t.day_index},
                      {"day_start", t.day_start}, {"source_node", t.source_node}});
  }
  j["tracks"] = std::move(tracks);
  json nodes = json::array();
  for (const ReebNode& n : g.nodes) {
    json jn{{"id", n.id}, {"members", n.members}, {"t_start", n.t_start}, {"t_end", n.t_end},
            {"support", n.support}, {"low_support", n.low_support}};
    json path = json::array();
    for (const TimedPoint& p : n.centroid_path) path.push_back({p.t, p.pos.lat_deg, p.pos.lon_deg});
    jn["centroid_path"] = std::move(path);
    if (n.features) {
      const NodeFeatures& f = *n.features;
      json jf{{"max_stop_duration_s", f.max_stop_duration_s},
              {"max_velocity_mps", f.max_velocity_mps},
              {"modes", f.modes.bits},
              {"modes_text", f.modes.to_string()},
              {"anchor", {f.anchor.lat_deg, f.anchor.lon_deg}},
              {"dwell_total_s", f.dwell_total_s}};
      jf["mean_bearing_deg"] = f.mean_bearing_deg ? json(*f.mean_bearing_deg) : json(nullptr);
      jn["features"] = std::move(jf);
    }
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const ReebEdge& e : g.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"carried", e.carried}});
  j["edges"] = std::move(edges);
  return j;
}

ReebGraph graph_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<std::uint32_t>() != kGraphFormatVersion) {
      throw FormatError("version mismatch");
    }
    ReebGraph g;
    g.kind = j.at("kind").get<std::string>() == "agent-terg" ? GraphKind::kAgentTerg
                                                              : GraphKind::kPopulationMarg;
    g.epsilon.epsilon = j.at("epsilon").get<double>();
    g.epsilon.metric = j.at("metric").get<std::string>() == "haversine" ? Metric::kHaversine
                                                                        : Metric::kEuclideanDeg;
    g.stride_s = j.at("stride_s").get<std::int64_t>();
    g.rep_stride_s = j.at("rep_stride_s").get<std::int64_t>();
    for (const auto& t : j.at("tracks")) {
      g.tracks.push_back({t.at("agent_id").get<std::string>(), t.at("day_index").get<std::int32_t>(),
                          t.at("day_start").get<std::int64_t>(), t.at("source_node").get<std::int64_t>()});
    }
    for (const auto& jn : j.at("nodes")) {
      ReebNode n;
      n.id = jn.at("id").get<std::uint32_t>();
      n.members = jn.at("members").get<std::vector<TrackId>>();
      n.t_start = jn.at("t_start").get<std::int64_t>();
      n.t_end = jn.at("t_end").get<std::int64_t>();
      n.support = jn.at("support").get<std::uint32_t>();
      n.low_support = jn.at("low_support").get<bool>();
      for (const auto& p : jn.at("centroid_path")) {
        n.centroid_path.push_back({p.at(0).get<std::int64_t>(), {p.at(1).get<double>(), p.at(2).get<double>()}});
      }
      if (jn.contains("features")) {
        const auto& jf = jn.at("features");
        NodeFeatures f;
        f.max_stop_duration_s = jf.at("max_stop_duration_s").get<double>();
        f.max_velocity_mps = jf.at("max_velocity_mps").get<double>();
        f.modes.bits = jf.at("modes").get<std::uint8_t>();
        f.anchor = {jf.at("anchor").at(0).get<double>(), jf.at("anchor").at(1).get<double>()};
        f.dwell_total_s = jf.at("dwell_total_s").get<double>();
        if (!jf.at("mean_bearing_deg").is_null()) f.mean_bearing_deg = jf.at("mean_bearing_deg").get<double>();
        n.features = f;
      }
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
      g.edges.push_back({je.at("from").get<std::uint32_t>(), je.at("to").get<std::uint32_t>(),
                         je.at("carried").get<std::vector<TrackId>>()});
    }
    return g;
  } catch (const nlohmann::json::exception&) {
    throw FormatError("corrupt payload");
  }
}

void save_graph(const std::filesystem::path& path, const ReebGraph& g, GraphFormat format) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    if (format == GraphFormat::kBinary) {
      const auto bytes = serialize(g);
      os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    } else {
      if (g.nodes.empty()) throw Error("empty graph not serializable");
      os << to_json(g).dump(1) << '\n';
    }
    if (!os) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ReebGraph load_graph(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    if (!bytes.empty() && bytes.front() == '{') {
      return graph_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
    }
    return deserialize(bytes);
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path.string() + ": corrupt payload");
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace polreeb
