#include "spikeprune/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sp {

std::vector<PruneSchedule> enumerate_schedules(const SearchSpace& space, int blocks) {
  if (blocks < 1) throw std::invalid_argument("enumerate_schedules: blocks must be >= 1");
  for (double r : space.candidate_ratios)
    if (r <= 0.0 || r > 1.0)
      throw std::invalid_argument("enumerate_schedules: candidate ratio out of (0,1]");
  std::vector<double> cand = space.candidate_ratios;
  std::sort(cand.begin(), cand.end(), std::greater<>());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::vector<PruneSchedule> out;
  std::vector<double> cur;
  // DFS over non-increasing sequences; `from` indexes into the descending set.
  auto rec = [&](auto&& self, size_t from, double sum) -> void {
    if (static_cast<int>(cur.size()) == blocks) {
      const double mean = sum / blocks;
      if (std::abs(mean - space.target_avg) <= space.tolerance + 1e-12)
        out.push_back({cur});
      return;
    }
    for (size_t i = from; i < cand.size(); ++i) {
      cur.push_back(cand[i]);
      self(self, i, sum + cand[i]);
      cur.pop_back();
    }
  };
  rec(rec, 0, 0.0);
  if (out.empty()) {
    std::ostringstream os;
    os << "enumerate_schedules: no non-increasing length-" << blocks
       << " schedule has mean within " << space.tolerance << " of " << space.target_avg
       << " over the candidate set";
    throw std::runtime_error(os.str());
  }
  return out;
}

namespace {
bool better(const SearchEntry& a, const SearchEntry& b) {
  if (a.batch_accuracy != b.batch_accuracy) return a.batch_accuracy > b.batch_accuracy;
  if (a.mean_ratio != b.mean_ratio) return a.mean_ratio > b.mean_ratio;
  return a.schedule.ratios > b.schedule.ratios;
}
}  // namespace

SearchReport search(const ModelConfig& cfg, const ModelWeights& w, const Dataset& batch,
                    const ScorerConfig& scorer, const SearchSpace& space) {
  std::vector<PruneSchedule> candidates = enumerate_schedules(space, cfg.num_blocks);
  SearchReport report;
  for (const PruneSchedule& s : candidates) {
    SearchEntry e;
    e.schedule = s;
    e.mean_ratio = s.mean();
    const auto t0 = std::chrono::steady_clock::now();
    e.batch_accuracy = evaluate(cfg, w, batch, &scorer, &s);
    e.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.ranked.push_back(std::move(e));
  }
  std::stable_sort(report.ranked.begin(), report.ranked.end(), better);
  report.best = report.ranked.front();
  return report;
}

std::string search_report_csv(const SearchReport& report) {
  std::ostringstream os;
  os << "schedule,mean_ratio,batch_accuracy,eval_seconds\n";
  for (const SearchEntry& e : report.ranked) {
    for (size_t i = 0; i < e.schedule.ratios.size(); ++i)
      os << (i ? " " : "") << e.schedule.ratios[i];
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.6g\n", e.mean_ratio, e.batch_accuracy,
                  e.eval_seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace sp
