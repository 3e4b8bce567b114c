#include "polreeb/evalx.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "polreeb/error.hpp"

namespace polreeb {

void LabeledScores::validate() const {
  if (scores.empty()) throw Error("empty input");
  if (scores.size() != labels.size() || (!agent_ids.empty() && agent_ids.size() != scores.size())) {
    throw Error("labeled score lists differ in length");
  }
}

std::size_t LabeledScores::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::kAnomalous));
}

std::vector<PrPoint> pr_curve(const LabeledScores& ls) {
  ls.validate();
  const std::size_t pos = ls.positives();
  if (pos == 0) throw Error("undefined recall");
  std::vector<std::size_t> order(ls.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ls.scores[a] > ls.scores[b]; });

  std::vector<PrPoint> out;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = ls.scores[order[i]];
    for (; i < order.size() && ls.scores[order[i]] == thr; ++i, ++seen) {
      if (ls.labels[order[i]] == Label::kAnomalous) ++tp;
    }
    out.push_back({thr, static_cast<double>(tp) / static_cast<double>(seen),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return out;
}

F1Point best_f1(std::span<const PrPoint> curve) {
  F1Point best;
  bool have = false;
  for (const PrPoint& p : curve) {
    const double f1 = p.precision + p.recall > 0.0 ? 2.0 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    if (!have || f1 > best.f1 || (f1 == best.f1 && p.threshold < best.threshold)) {
      best = {f1, p.precision, p.recall, p.threshold};
      have = true;
    }
  }
  return best;
}

double auc_pr(const LabeledScores& ls) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const PrPoint& p : pr_curve(ls)) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

WlgReport wlg_flag_report(std::span<const AgentDetection> detections, const WlgAssignment& wlg,
                          const std::set<std::string>& anomalous) {
  std::map<std::string, WlgRow> rows;
  for (const auto& [agent, group] : wlg) {
    WlgRow& r = rows[group];
    r.group_id = group;
    ++r.size;
    if (anomalous.contains(agent)) r.has_true_anomaly = true;
  }
  WlgReport rep;
  for (const AgentDetection& d : detections) {
    if (!d.flagged) continue;
    auto it = wlg.find(d.agent_id);
    if (it == wlg.end()) throw Error("missing group assignment for: " + d.agent_id);
    ++rows[it->second].flagged;
    ++rep.total_flagged;
  }
  for (auto& [g, r] : rows) {
    if (r.flagged > 0) ++rep.groups_with_flags;
    if (r.has_true_anomaly) ++rep.groups_with_anomaly;
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

}  // namespace polreeb
