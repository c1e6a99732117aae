#pragma once

#include <string>
#include <vector>

#include "spikeprune/model.hpp"
#include "spikeprune/training.hpp"

namespace sp {

struct SearchSpace {
  std::vector<double> candidate_ratios = {1.0, 0.9, 0.81, 0.72, 0.64, 0.56, 0.49};
  double target_avg = 0.65;
  double tolerance = 0.03;  // band on the schedule mean
};

// All length-L non-increasing sequences over candidate_ratios whose mean lies
// within tolerance of target_avg. Throws with a diagnostic when empty.
std::vector<PruneSchedule> enumerate_schedules(const SearchSpace& space, int blocks);

struct SearchEntry {
  PruneSchedule schedule;
  double mean_ratio = 0;
  double batch_accuracy = 0;
  double eval_seconds = 0;
};

struct SearchReport {
  std::vector<SearchEntry> ranked;  // best first
  SearchEntry best;
};

// Evaluates every candidate on the fixed batch; argmax accuracy with ties
// broken toward higher mean retention, then lexicographically greater.
SearchReport search(const ModelConfig& cfg, const ModelWeights& w, const Dataset& batch,
                    const ScorerConfig& scorer, const SearchSpace& space);

std::string search_report_csv(const SearchReport& report);

}  // namespace sp
