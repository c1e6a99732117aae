#include "spikeprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sp {

double PruneSchedule::mean() const {
  if (ratios.empty()) return 0.0;
  return std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size());
}

PruneSchedule PruneSchedule::all_ones(int blocks) {
  PruneSchedule s;
  s.ratios.assign(static_cast<size_t>(blocks), 1.0);
  return s;
}

ScoreMap spatial_score(const Tensor& x, const ScorerConfig& cfg) {
  if (x.ndim() != 3) throw std::invalid_argument("spatial_score: expected [HxWxD]");
  const int h = x.dim(0), w = x.dim(1);
  const Tensor means = window_mean(x, cfg.window_k);
  ScoreMap out;
  out.scores = Tensor({h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int r = i * w + j;
      out.scores.at(i, j) = 1.0 - cosine_similarity(x.row(r), means.row(r), cfg.eps);
    }
  return out;
}

ScoreMap temporal_score(const Tensor& x_t, const Tensor* x_prev, const ScorerConfig& cfg) {
  if (x_t.ndim() != 3) throw std::invalid_argument("temporal_score: expected [HxWxD]");
  if (x_prev && !x_prev->same_shape(x_t))
    throw std::invalid_argument("temporal_score: slice shapes differ");
  const int h = x_t.dim(0), w = x_t.dim(1), d = x_t.dim(2);
  ScoreMap out;
  out.scores = Tensor({h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) {
        const double dv = x_t.at(i, j, c) - (x_prev ? x_prev->at(i, j, c) : 0.0);
        acc += (cfg.norm_kind == TemporalNorm::l1) ? std::abs(dv) : dv * dv;
      }
      out.scores.at(i, j) = (cfg.norm_kind == TemporalNorm::l1) ? acc : std::sqrt(acc);
    }
  return out;
}

ScoreMap normalize(const ScoreMap& raw) {
  double sum = 0.0;
  for (double v : raw.scores.data) {
    if (v < 0.0) throw std::runtime_error("normalize: negative raw score");
    sum += v;
  }
  ScoreMap out;
  out.scores = raw.scores;
  out.normalized = true;
  if (sum == 0.0) {
    const double u = 1.0 / raw.scores.numel();
    std::fill(out.scores.data.begin(), out.scores.data.end(), u);
  } else {
    for (double& v : out.scores.data) v /= sum;
  }
  return out;
}

ScoreMap irtop(const Tensor& x_t, const Tensor* x_prev, int t, const ScorerConfig& cfg) {
  ScoreMap s = normalize(spatial_score(x_t, cfg));
  if (t == 1 && cfg.spatial_only_first_step) return s;
  ScoreMap tm = normalize(temporal_score(x_t, t > 1 ? x_prev : nullptr, cfg));
  ScoreMap combined;
  combined.scores = s.scores;
  for (int i = 0; i < combined.scores.numel(); ++i) {
    combined.scores.at(i) = cfg.alpha * s.scores.at(i) + (1.0 - cfg.alpha) * tm.scores.at(i);
  }
  return normalize(combined);
}

TokenPartition partition(const ScoreMap& scores, double ratio) {
  if (ratio <= 0.0 || ratio > 1.0) throw std::invalid_argument("partition: ratio out of (0,1]");
  const int n = scores.scores.numel();
  const int keep = static_cast<int>(std::ceil(ratio * n));
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores.scores.at(a) > scores.scores.at(b);  // stable: ties keep lower index first
  });
  TokenPartition part;
  part.informative.assign(order.begin(), order.begin() + keep);
  part.uninformative.assign(order.begin() + keep, order.end());
  std::sort(part.informative.begin(), part.informative.end());
  std::sort(part.uninformative.begin(), part.uninformative.end());
  return part;
}

void write_score_csv(const std::string& path, const Tensor& scores) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const int h = scores.dim(0), w = scores.dim(1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", scores.at(i, j));
      f << (j ? "," : "") << buf;
    }
    f << "\n";
  }
}

void write_mask_csv(const std::string& path, const TokenPartition& part, int h, int w) {
  std::vector<int> mask(static_cast<size_t>(h * w), 0);
  for (int i : part.informative) mask[static_cast<size_t>(i)] = 1;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) f << (j ? "," : "") << mask[static_cast<size_t>(i * w + j)];
    f << "\n";
  }
}

namespace {
void write_pgm(const std::string& path, int h, int w, const std::vector<unsigned char>& px) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "P5\n" << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}
}  // namespace

void write_score_pgm(const std::string& path, const Tensor& scores) {
  const int h = scores.dim(0), w = scores.dim(1);
  double lo = scores.at(0), hi = scores.at(0);
  for (double v : scores.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = (hi > lo) ? (hi - lo) : 1.0;
  std::vector<unsigned char> px(static_cast<size_t>(h * w));
  for (int i = 0; i < h * w; ++i)
    px[static_cast<size_t>(i)] =
        static_cast<unsigned char>(std::lround(255.0 * (scores.at(i) - lo) / span));
  write_pgm(path, h, w, px);
}

void write_mask_pgm(const std::string& path, const TokenPartition& part, int h, int w) {
  std::vector<unsigned char> px(static_cast<size_t>(h * w), 0);
  for (int i : part.informative) px[static_cast<size_t>(i)] = 255;
  write_pgm(path, h, w, px);
}

}  // namespace sp
