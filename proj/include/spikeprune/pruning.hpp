#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spikeprune/tensor.hpp"

namespace sp {

enum class TemporalNorm { l1, l2 };

struct ScorerConfig {
  int window_k = 3;
  double alpha = 0.5;                  // spatial weight: alpha*S + (1-alpha)*T
  bool spatial_only_first_step = true;
  TemporalNorm norm_kind = TemporalNorm::l1;
  double eps = 1e-8;
};

// Per-token importance scores on the H x W grid of one time step.
struct ScoreMap {
  Tensor scores;  // [H x W]
  bool normalized = false;
};

// Per-block token retention ratios (fraction kept), r_1..r_L in (0, 1].
struct PruneSchedule {
  std::vector<double> ratios;

  double mean() const;
  static PruneSchedule all_ones(int blocks);
};

struct TokenPartition {
  std::vector<int> informative;    // flattened h*W+w indices, ascending
  std::vector<int> uninformative;  // complement, ascending
};

// Dissimilarity between each token and the per-channel mean of its k x k
// window: 1 - cos(token, window mean). Raw (unnormalized) map.
ScoreMap spatial_score(const Tensor& x, const ScorerConfig& cfg);  // x: [HxWxD]

// Per-token norm of the change since the previous step; plain norm of the
// current slice when there is no previous step.
ScoreMap temporal_score(const Tensor& x_t, const Tensor* x_prev, const ScorerConfig& cfg);

// Divide by the sum; all-zero maps become uniform 1/(H*W).
ScoreMap normalize(const ScoreMap& raw);

// Combined normalized score: alpha*S^ + (1-alpha)*T^, renormalized.
// At t == 1 with spatial_only_first_step, the spatial map alone is used.
ScoreMap irtop(const Tensor& x_t, const Tensor* x_prev, int t, const ScorerConfig& cfg);

// Keep the ceil(ratio*H*W) highest-scoring coordinates; ties break toward the
// lower flattened index. Deterministic.
TokenPartition partition(const ScoreMap& scores, double ratio);

// Score-map / keep-mask dumps for visual inspection.
void write_score_csv(const std::string& path, const Tensor& scores);
void write_mask_csv(const std::string& path, const TokenPartition& part, int h, int w);
void write_score_pgm(const std::string& path, const Tensor& scores);  // P5, min-max scaled
void write_mask_pgm(const std::string& path, const TokenPartition& part, int h, int w);

}  // namespace sp
