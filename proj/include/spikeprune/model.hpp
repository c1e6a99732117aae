#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikeprune/metrics.hpp"
#include "spikeprune/pruning.hpp"
#include "spikeprune/tape.hpp"

namespace sp {

struct NeuronCfg {
  double tau = 0.5;
  double theta = 1.0;
  double beta = 1.0;
  ResetMode reset = ResetMode::soft;

  LifParams lif() const { return {tau, theta, reset}; }
  SurrogateParams sg() const { return {beta}; }
};

struct ModelConfig {
  int time_steps = 4;
  int input_h = 16, input_w = 16, input_c = 1;
  int patch = 4;
  int embed_dim = 32;
  int heads = 4;
  int num_blocks = 2;
  int mlp_ratio = 4;
  int classes = 2;
  double attn_scale = 0.125;
  bool merge_stage = false;  // 2x2 stride-2 conv + LIF after block num_blocks/2
  NeuronCfg neuron;

  void validate() const;  // throws std::invalid_argument naming the field

  int grid_h() const { return input_h / patch; }
  int grid_w() const { return input_w / patch; }
  // First block index that runs after the merge stage; num_blocks if none.
  int merge_before() const { return merge_stage ? num_blocks / 2 : num_blocks; }
  bool block_merged(int b) const { return merge_stage && b >= merge_before(); }
  int block_dim(int b) const { return block_merged(b) ? 2 * embed_dim : embed_dim; }
  int block_grid_h(int b) const { return block_merged(b) ? grid_h() / 2 : grid_h(); }
  int block_grid_w(int b) const { return block_merged(b) ? grid_w() / 2 : grid_w(); }
  int block_tokens(int b) const { return block_grid_h(b) * block_grid_w(b); }
  int final_dim() const { return merge_stage ? 2 * embed_dim : embed_dim; }
};

struct Affine {
  Tensor gain;   // [C]
  Tensor shift;  // [C]
};

struct BlockWeights {
  Tensor w_q, w_k, w_v, w_proj;  // [D x D]
  Tensor mlp_w1;                 // [D x ratio*D]
  Tensor mlp_w2;                 // [ratio*D x D]
  Affine aff_q, aff_k, aff_v, aff_m1, aff_m2;
};

struct ModelWeights {
  Tensor embed_conv;  // [P, P, Cin, D]
  Affine embed_aff;
  Tensor embed_dw;  // [3, 3, D]
  std::vector<BlockWeights> blocks;
  Tensor merge_conv;  // [2, 2, D, 2D]; empty when no merge stage
  Affine merge_aff;
  Tensor head_w;  // [Dfinal x classes]
  Tensor head_b;  // [classes]

  static ModelWeights init(const ModelConfig& cfg, Rng& rng);

  // Visits every parameter in a fixed order (serialization, SGD, tape leaves).
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& f);
  void for_each_param(const std::function<void(const std::string&, const Tensor&)>& f) const;
};

// Per-(block, step) record of a pruned forward, for bypass checks and dumps.
struct PruneTraceEntry {
  int block = 0;
  int t = 0;  // 1-based time step
  ScoreMap scores;
  TokenPartition part;
  Tensor input;   // [N x D] block input spikes
  Tensor output;  // [N x D] reassembled block output
  std::vector<Tensor> mem_before;  // all neuron-layer membranes of the block
  std::vector<Tensor> mem_after;
};

struct PruneTrace {
  std::vector<PruneTraceEntry> entries;
};

struct ForwardOptions {
  const ScorerConfig* scorer = nullptr;
  const PruneSchedule* schedule = nullptr;  // null: dense forward
  SpikeMode mode = SpikeMode::binary;
  RunStats* stats = nullptr;
  PruneTrace* trace = nullptr;
};

// Full forward over T steps; returns the logits vector [classes],
// averaged over time steps.
Tensor model_forward(const ModelConfig& cfg, const ModelWeights& w, const Tensor& image,
                     const ForwardOptions& opt = {});

Tensor model_forward_pruned(const ModelConfig& cfg, const ModelWeights& w, const Tensor& image,
                            const ScorerConfig& scorer, const PruneSchedule& schedule,
                            const ForwardOptions& opt = {});

// Forward with gradient recording, for STBP training.
struct RecordedForward {
  std::unique_ptr<Tape> tape;
  Var logits;
  std::vector<std::string> param_names;
  std::vector<Var> params;
};

RecordedForward forward_recorded(const ModelConfig& cfg, const ModelWeights& w,
                                 const Tensor& image, const ForwardOptions& opt = {});

// Runs backward from d(loss)/d(logits); returns gradients in for_each_param order.
std::vector<Tensor> grads_from_logits(RecordedForward& fwd, const Tensor& dlogits);

}  // namespace sp
