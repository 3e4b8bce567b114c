#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "polreeb/scoring.hpp"

namespace polreeb {

enum class Label : std::uint8_t { kNormal, kAnomalous };

struct LabeledScores {
  std::vector<std::string> agent_ids;
  std::vector<double> scores;
  std::vector<Label> labels;

  void validate() const;
  std::size_t positives() const;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// One point per distinct score, thresholds descending; an item counts as
// predicted positive when its score is >= the threshold.
std::vector<PrPoint> pr_curve(const LabeledScores& ls);

struct F1Point {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
};

F1Point best_f1(std::span<const PrPoint> curve);

// Average precision: sum over curve points of (R_i - R_{i-1}) * P_i.
double auc_pr(const LabeledScores& ls);

struct WlgRow {
  std::string group_id;
  std::size_t size = 0;
  std::size_t flagged = 0;
  bool has_true_anomaly = false;
};

struct WlgReport {
  std::vector<WlgRow> rows;  // ordered by group id
  std::size_t total_flagged = 0;
  std::size_t groups_with_flags = 0;
  std::size_t groups_with_anomaly = 0;
};

WlgReport wlg_flag_report(std::span<const AgentDetection> detections, const WlgAssignment& wlg,
                          const std::set<std::string>& anomalous);

}  // namespace polreeb
