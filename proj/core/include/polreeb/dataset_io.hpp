#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polreeb/error.hpp"
#include "polreeb/scoring.hpp"
#include "polreeb/trajectory.hpp"

namespace polreeb {

struct IngestIssue {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

class IngestError : public Error {
 public:
  IngestError(std::filesystem::path path, std::vector<IngestIssue> issues);

  const std::filesystem::path& path() const noexcept { return path_; }
  const std::vector<IngestIssue>& issues() const noexcept { return issues_; }

 private:
  std::filesystem::path path_;
  std::vector<IngestIssue> issues_;
};

// RFC 3339 date-time ("2024-01-01T08:00:00Z", offsets and fractions allowed)
// to epoch seconds, fractions floored.
std::optional<std::int64_t> parse_rfc3339(std::string_view s);

// Per-agent CSV `agent_id,timestamp,latitude,longitude`. Timestamps are epoch
// seconds or RFC 3339, detected from the first data row. Rows may come in any
// order; duplicate timestamps and malformed rows are all reported at once.
AgentTrajectory read_agent_csv(const std::filesystem::path& path);
void write_agent_csv(const std::filesystem::path& path, const AgentTrajectory& traj);

// Shortest round-trip decimal form.
std::string format_double(double v);

// Agent ids with a CSV under <root>/agents, sorted.
std::vector<std::string> list_agents(const std::filesystem::path& root);
std::filesystem::path agent_csv_path(const std::filesystem::path& root, const std::string& agent_id);

WlgAssignment read_wlg_csv(const std::filesystem::path& path);
void write_wlg_csv(const std::filesystem::path& path, const WlgAssignment& wlg);

// Single-column CSV with header `agent_id`.
std::vector<std::string> read_id_list(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file and renames, creating parent directories.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace polreeb
