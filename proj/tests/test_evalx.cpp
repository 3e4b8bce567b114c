#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "polreeb/error.hpp"
#include "polreeb/evalx.hpp"

using namespace polreeb;

namespace {

LabeledScores make(std::vector<double> s, std::vector<int> pos) {
  LabeledScores ls;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ls.agent_ids.push_back("a" + std::to_string(i));
    ls.scores.push_back(s[i]);
    ls.labels.push_back(pos[i] ? Label::kAnomalous : Label::kNormal);
  }
  return ls;
}

// Average precision by brute force: for each positive, precision among all
// items scoring at least its score, times 1/P.
double ap_oracle(const LabeledScores& ls) {
  double total = 0.0;
  std::size_t P = 0;
  for (auto l : ls.labels) P += l == Label::kAnomalous;
  std::vector<double> seen;
  for (std::size_t i = 0; i < ls.scores.size(); ++i) {
    const double th = ls.scores[i];
    if (std::find(seen.begin(), seen.end(), th) != seen.end()) continue;
    seen.push_back(th);
    std::size_t at = 0, tp = 0, tie_pos = 0;
    for (std::size_t j = 0; j < ls.scores.size(); ++j) {
      if (ls.scores[j] >= th) {
        ++at;
        tp += ls.labels[j] == Label::kAnomalous;
      }
      if (ls.scores[j] == th) tie_pos += ls.labels[j] == Label::kAnomalous;
    }
    total += static_cast<double>(tie_pos) / static_cast<double>(P) * static_cast<double>(tp) / static_cast<double>(at);
  }
  return total;
}

}  // namespace

TEST_CASE("precision-recall curve") {
  const auto three = make({0.9, 0.8, 0.7}, {1, 0, 1});
  const auto c = pr_curve(three);
  REQUIRE(c.size() == 3);
  CHECK(c[0].precision == doctest::Approx(1.0));
  CHECK(c[0].recall == doctest::Approx(0.5));
  CHECK(c[1].precision == doctest::Approx(0.5));
  CHECK(c[1].recall == doctest::Approx(0.5));
  CHECK(c[2].precision == doctest::Approx(2.0 / 3.0));
  CHECK(c[2].recall == doctest::Approx(1.0));
  const auto perfect = pr_curve(make({1, 1, 0, 0}, {1, 1, 0, 0}));
  CHECK(perfect.front().precision == 1.0);
  CHECK(perfect.front().recall == 1.0);
  const auto flat = pr_curve(make({0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0}));
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].precision == doctest::Approx(0.25));
  CHECK(flat[0].recall == 1.0);
  CHECK_THROWS_WITH(pr_curve(make({0.1, 0.2}, {0, 0})), "undefined recall");
}

TEST_CASE("best F1") {
  const auto c = pr_curve(make({0.9, 0.8, 0.7}, {1, 0, 1}));
  const F1Point b = best_f1(c);
  double oracle = 0.0;
  for (const auto& pt : c) oracle = std::max(oracle, 2.0 * pt.precision * pt.recall / (pt.precision + pt.recall));
  CHECK(b.f1 == doctest::Approx(oracle));
  CHECK(b.f1 == doctest::Approx(0.8));
  CHECK(b.threshold == doctest::Approx(0.7));
  CHECK(best_f1(pr_curve(make({1, 0}, {1, 0}))).f1 == doctest::Approx(1.0));
  const std::vector<PrPoint> single{{0.3, 0.5, 1.0}};
  CHECK(best_f1(single).f1 == doctest::Approx(0.6667).epsilon(1e-3));
}

TEST_CASE("average precision") {
  CHECK(auc_pr(make({0.9, 0.8, 0.7}, {1, 0, 1})) == doctest::Approx(0.8333).epsilon(1e-3));
  CHECK(auc_pr(make({0.9, 0.8, 0.1}, {1, 1, 0})) == doctest::Approx(1.0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(u(rng) * 300);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < n; ++i) {
      s.push_back(std::round(u(rng) * 20) / 20);  // plenty of ties
      l.push_back(u(rng) < 0.3);
    }
    l[0] = 1;
    const auto ls = make(s, l);
    CHECK(auc_pr(ls) == doctest::Approx(ap_oracle(ls)).epsilon(1e-12));
    // permutation invariance
    auto shuffled = ls;
    std::vector<std::size_t> idx(ls.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      shuffled.scores[i] = ls.scores[idx[i]];
      shuffled.labels[i] = ls.labels[idx[i]];
      shuffled.agent_ids[i] = ls.agent_ids[idx[i]];
    }
    CHECK(auc_pr(shuffled) == doctest::Approx(auc_pr(ls)).epsilon(1e-12));
    const auto curve = pr_curve(ls);
    const F1Point best = best_f1(curve);
    for (const auto& p : curve) {
      const double f = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
      CHECK(best.f1 >= f - 1e-12);
    }
  }
}

TEST_CASE("weak-label group report") {
  const WlgAssignment wlg{{"a", "g1"}, {"b", "g1"}, {"c", "g2"}, {"d", "g2"}};
  std::vector<AgentDetection> det{{"a", 0.9, true, {}}, {"b", 0.1, false, {}}, {"c", 0.5, true, {}}, {"d", 0.4, false, {}}};
  const auto rep = wlg_flag_report(det, wlg, {"a"});
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].group_id == "g1");
  CHECK(rep.rows[0].flagged == 1);
  CHECK(rep.rows[0].has_true_anomaly);
  CHECK_FALSE(rep.rows[1].has_true_anomaly);
  CHECK(rep.total_flagged == 2);
  CHECK(rep.groups_with_flags == 2);
  for (auto& d : det) d.flagged = false;
  const auto none = wlg_flag_report(det, wlg, {});
  CHECK(none.total_flagged == 0);
  for (const auto& r : none.rows) CHECK(r.flagged == 0);
}
