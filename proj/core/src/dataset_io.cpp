#include "polreeb/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace polreeb {
namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <class F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    f(line_no, line);
    pos = end + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

template <class T>
std::optional<T> parse_int(std::string_view s) {
  T v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_epoch(std::string_view s) {
  if (auto i = parse_int<std::int64_t>(s)) return i;
  const auto d = parse_double(s);
  if (!d || !std::isfinite(*d)) return std::nullopt;
  return static_cast<std::int64_t>(std::floor(*d));
}

std::string format_issues(const fs::path& path, const std::vector<IngestIssue>& issues) {
  std::ostringstream os;
  os << path.string() << ": " << issues.size() << " bad record(s)";
  const std::size_t shown = std::min<std::size_t>(issues.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) os << "\n  line " << issues[i].line << ": " << issues[i].message;
  if (shown < issues.size()) os << "\n  ...";
  return os.str();
}

}  // namespace

IngestError::IngestError(fs::path path, std::vector<IngestIssue> issues)
    : Error(format_issues(path, issues)), path_(std::move(path)), issues_(std::move(issues)) {}

std::optional<std::int64_t> parse_rfc3339(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
  if (s.size() < 20) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  const auto y = parse_int<int>(s.substr(0, 4));
  const auto mo = parse_int<unsigned>(s.substr(5, 2));
  const auto d = parse_int<unsigned>(s.substr(8, 2));
  const auto h = parse_int<int>(s.substr(11, 2));
  const auto mi = parse_int<int>(s.substr(14, 2));
  const auto se = parse_int<int>(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;
  std::size_t i = 19;
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t digits = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == digits) return std::nullopt;
  }
  if (i >= s.size()) return std::nullopt;
  std::int64_t offset = 0;
  if (s[i] == 'Z' || s[i] == 'z') {
    if (i + 1 != s.size()) return std::nullopt;
  } else if ((s[i] == '+' || s[i] == '-') && s.size() == i + 6 && s[i + 3] == ':') {
    const auto oh = parse_int<int>(s.substr(i + 1, 2));
    const auto om = parse_int<int>(s.substr(i + 4, 2));
    if (!oh || !om || *oh > 23 || *om > 59) return std::nullopt;
    offset = (*oh * 3600 + *om * 60) * (s[i] == '-' ? -1 : 1);
  } else {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{*mo}, std::chrono::day{*d}};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return days * kSecondsPerDay + *h * 3600 + *mi * 60 + *se - offset;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

AgentTrajectory read_agent_csv(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<IngestIssue> issues;
  std::vector<std::pair<TimedPoint, std::size_t>> rows;
  std::string agent;
  enum class TimeFormat { kUnknown, kEpoch, kRfc3339 } fmt = TimeFormat::kUnknown;
  for_each_line(text, [&](std::size_t no, std::string_view line) {
    if (no == 1) {
      if (line != "agent_id,timestamp,latitude,longitude") {
        issues.push_back({no, "expected header agent_id,timestamp,latitude,longitude"});
      }
      return;
    }
    if (line.empty()) return;
    const auto f = split(line);
    if (f.size() != 4) {
      issues.push_back({no, "expected 4 fields, found " + std::to_string(f.size())});
      return;
    }
    if (agent.empty()) agent = std::string(f[0]);
    if (f[0] != agent) {
      issues.push_back({no, "agent id '" + std::string(f[0]) + "' differs from '" + agent + "'"});
      return;
    }
    if (fmt == TimeFormat::kUnknown) fmt = parse_epoch(f[1]) ? TimeFormat::kEpoch : TimeFormat::kRfc3339;
    const auto t = fmt == TimeFormat::kEpoch ? parse_epoch(f[1]) : parse_rfc3339(f[1]);
    const auto lat = parse_double(f[2]);
    const auto lon = parse_double(f[3]);
    if (!t) {
      issues.push_back({no, "bad timestamp '" + std::string(f[1]) + "'"});
      return;
    }
    if (*t < 0) {
      issues.push_back({no, "negative timestamp"});
      return;
    }
    if (!lat || !lon) {
      issues.push_back({no, "bad coordinate"});
      return;
    }
    const GeoPoint p{*lat, *lon};
    if (!p.valid()) {
      issues.push_back({no, "coordinate out of range"});
      return;
    }
    rows.push_back({{*t, p}, no});
  });
  if (text.empty()) issues.push_back({1, "missing header"});
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.t < b.first.t; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].first.t == rows[i - 1].first.t) {
      issues.push_back({rows[i].second, "duplicate timestamp " + std::to_string(rows[i].first.t) +
                                            " (first seen on line " + std::to_string(rows[i - 1].second) + ")"});
    }
  }
  if (rows.empty() && issues.empty()) issues.push_back({2, "no records"});
  if (!issues.empty()) {
    std::sort(issues.begin(), issues.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
    throw IngestError(path, std::move(issues));
  }
  std::vector<TimedPoint> pts;
  pts.reserve(rows.size());
  for (auto& r : rows) pts.push_back(r.first);
  return AgentTrajectory::make(agent, std::move(pts));
}

void write_agent_csv(const fs::path& path, const AgentTrajectory& traj) {
  std::string out = "agent_id,timestamp,latitude,longitude\n";
  out.reserve(out.size() + traj.points.size() * (traj.agent_id.size() + 36));
  char buf[32];
  for (const TimedPoint& p : traj.points) {
    out += traj.agent_id;
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof buf, p.t).ptr);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof buf, p.pos.lat_deg).ptr);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof buf, p.pos.lon_deg).ptr);
    out += '\n';
  }
  write_text_atomic(path, out);
}

fs::path agent_csv_path(const fs::path& root, const std::string& agent_id) {
  return root / "agents" / (agent_id + ".csv");
}

std::vector<std::string> list_agents(const fs::path& root) {
  const fs::path dir = root / "agents";
  if (!fs::is_directory(dir)) throw Error("no agents directory under " + root.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

WlgAssignment read_wlg_csv(const fs::path& path) {
  WlgAssignment out;
  std::vector<IngestIssue> issues;
  for_each_line(read_text(path), [&](std::size_t no, std::string_view line) {
    if (no == 1) {
      if (line != "agent_id,group_id") issues.push_back({no, "expected header agent_id,group_id"});
      return;
    }
    if (line.empty()) return;
    const auto f = split(line);
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      issues.push_back({no, "expected agent_id,group_id"});
    } else if (!out.emplace(std::string(f[0]), std::string(f[1])).second) {
      issues.push_back({no, "agent listed twice"});
    }
  });
  if (!issues.empty()) throw IngestError(path, std::move(issues));
  return out;
}

void write_wlg_csv(const fs::path& path, const WlgAssignment& wlg) {
  std::string out = "agent_id,group_id\n";
  for (const auto& [a, g] : wlg) out += a + ',' + g + '\n';
  write_text_atomic(path, out);
}

std::vector<std::string> read_id_list(const fs::path& path) {
  std::vector<std::string> out;
  std::vector<IngestIssue> issues;
  for_each_line(read_text(path), [&](std::size_t no, std::string_view line) {
    if (no == 1) {
      if (split(line).front() != "agent_id") issues.push_back({no, "expected header agent_id"});
      return;
    }
    if (!line.empty()) out.emplace_back(split(line).front());
  });
  if (!issues.empty()) throw IngestError(path, std::move(issues));
  return out;
}

}  // namespace polreeb
