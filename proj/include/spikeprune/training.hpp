#pragma once

#include <string>
#include <vector>

#include "spikeprune/model.hpp"

namespace sp {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.5;
  double momentum = 0.9;
  uint64_t seed = 1;
  double finetune_lr_factor = 0.1;  // finetune runs at learning_rate * factor
};

struct DataConfig {
  int classes = 2;
  int train_samples = 128;
  int eval_samples = 64;
  double noise = 0.1;
  uint64_t seed = 7;
  int height = 16, width = 16, channels = 1;
};

struct Sample {
  Tensor image;  // [H x W x C]
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
};

// Class 0: bright centered blob; class 1: bright corner blob. Gaussian noise,
// balanced labels, reproducible from seed.
Dataset make_synthetic(const DataConfig& cfg, int count, uint64_t seed);

double cross_entropy(const Tensor& logits, int label);
Tensor cross_entropy_grad(const Tensor& logits, int label);  // softmax - onehot
int argmax_logit(const Tensor& logits);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double eval_acc = 0;
};

// Minibatch SGD with momentum; per-sample STBP gradients averaged over the
// batch. Forward is pruned when a schedule is given. Deterministic from seed.
std::vector<EpochMetrics> train(const ModelConfig& cfg, ModelWeights& w,
                                const Dataset& train_set, const Dataset& eval_set,
                                const TrainConfig& tc, const ScorerConfig* scorer = nullptr,
                                const PruneSchedule* schedule = nullptr);

// Same loop at the reduced fine-tuning rate, forward always pruned.
std::vector<EpochMetrics> finetune_pruned(const ModelConfig& cfg, ModelWeights& w,
                                          const Dataset& train_set, const Dataset& eval_set,
                                          const TrainConfig& tc, const ScorerConfig& scorer,
                                          const PruneSchedule& schedule);

// Accuracy on the first `limit` samples (all when limit < 0).
double evaluate(const ModelConfig& cfg, const ModelWeights& w, const Dataset& ds,
                const ScorerConfig* scorer = nullptr, const PruneSchedule* schedule = nullptr,
                int limit = -1);

std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

}  // namespace sp
