#include "spikeprune/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sp {

Dataset make_synthetic(const DataConfig& cfg, int count, uint64_t seed) {
  if (cfg.classes != 2) throw std::invalid_argument("make_synthetic: only 2 classes supported");
  Rng rng(seed);
  Dataset ds;
  ds.samples.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;  // balanced
    // class 0: blob in the middle; class 1: blob at the top-left corner
    const double cy = label == 0 ? (cfg.height - 1) / 2.0 : 1.5;
    const double cx = label == 0 ? (cfg.width - 1) / 2.0 : 1.5;
    const double sigma = 2.0;
    Tensor img({cfg.height, cfg.width, cfg.channels});
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double v = std::exp(-d2 / (2.0 * sigma * sigma));
        for (int c = 0; c < cfg.channels; ++c)
          img.at(y, x, c) = std::max(0.0, v + cfg.noise * rng.normal());
      }
    ds.samples.push_back({std::move(img), label});
  }
  return ds;
}

double cross_entropy(const Tensor& logits, int label) {
  double mx = logits.at(0);
  for (double v : logits.data) mx = std::max(mx, v);
  double z = 0;
  for (double v : logits.data) z += std::exp(v - mx);
  return std::log(z) - (logits.at(label) - mx);
}

Tensor cross_entropy_grad(const Tensor& logits, int label) {
  double mx = logits.at(0);
  for (double v : logits.data) mx = std::max(mx, v);
  double z = 0;
  for (double v : logits.data) z += std::exp(v - mx);
  Tensor g(logits.shape);
  for (int i = 0; i < logits.numel(); ++i) g.at(i) = std::exp(logits.at(i) - mx) / z;
  g.at(label) -= 1.0;
  return g;
}

int argmax_logit(const Tensor& logits) {
  int best = 0;
  for (int i = 1; i < logits.numel(); ++i)
    if (logits.at(i) > logits.at(best)) best = i;
  return best;
}

double evaluate(const ModelConfig& cfg, const ModelWeights& w, const Dataset& ds,
                const ScorerConfig* scorer, const PruneSchedule* schedule, int limit) {
  const int n = (limit < 0) ? static_cast<int>(ds.samples.size())
                            : std::min<int>(limit, static_cast<int>(ds.samples.size()));
  if (n == 0) return 0.0;
  int correct = 0;
  ForwardOptions opt;
  opt.scorer = scorer;
  opt.schedule = schedule;
  for (int i = 0; i < n; ++i) {
    Tensor logits = model_forward(cfg, w, ds.samples[static_cast<size_t>(i)].image, opt);
    if (argmax_logit(logits) == ds.samples[static_cast<size_t>(i)].label) ++correct;
  }
  return static_cast<double>(correct) / n;
}

namespace {

struct Optimizer {
  std::vector<Tensor*> weights;
  std::vector<Tensor> velocity;

  explicit Optimizer(ModelWeights& w) {
    w.for_each_param([&](const std::string&, Tensor& t) {
      weights.push_back(&t);
      velocity.push_back(Tensor::zeros(t.shape));
    });
  }

  void step(const std::vector<Tensor>& grads, double lr, double momentum) {
    for (size_t i = 0; i < weights.size(); ++i) {
      Tensor& v = velocity[i];
      for (int j = 0; j < v.numel(); ++j) {
        v.at(j) = momentum * v.at(j) + grads[i].at(j);
        weights[i]->at(j) -= lr * v.at(j);
      }
    }
  }
};

std::vector<EpochMetrics> run_sgd(const ModelConfig& cfg, ModelWeights& w,
                                  const Dataset& train_set, const Dataset& eval_set,
                                  const TrainConfig& tc, double lr, const ScorerConfig* scorer,
                                  const PruneSchedule* schedule) {
  if (lr < 0) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (tc.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  Optimizer opt(w);
  Rng rng(tc.seed);
  const int n = static_cast<int>(train_set.samples.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  ForwardOptions fo;
  fo.scorer = scorer;
  fo.schedule = schedule;

  std::vector<EpochMetrics> metrics;
  for (int e = 0; e < tc.epochs; ++e) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

    double loss_sum = 0;
    int correct = 0;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int end = std::min(n, start + tc.batch_size);
      std::vector<Tensor> acc;
      for (int i = start; i < end; ++i) {
        const Sample& s = train_set.samples[static_cast<size_t>(order[i])];
        RecordedForward fwd = forward_recorded(cfg, w, s.image, fo);
        const Tensor logits = fwd.tape->val(fwd.logits);
        loss_sum += cross_entropy(logits, s.label);
        if (argmax_logit(logits) == s.label) ++correct;
        std::vector<Tensor> grads = grads_from_logits(fwd, cross_entropy_grad(logits, s.label));
        if (acc.empty()) {
          acc = std::move(grads);
        } else {
          for (size_t p = 0; p < acc.size(); ++p)
            for (int j = 0; j < acc[p].numel(); ++j) acc[p].at(j) += grads[p].at(j);
        }
      }
      const double inv = 1.0 / (end - start);
      for (Tensor& t : acc)
        for (double& v : t.data) v *= inv;
      opt.step(acc, lr, tc.momentum);
    }
    EpochMetrics m;
    m.epoch = e;
    m.train_loss = loss_sum / n;
    m.train_acc = static_cast<double>(correct) / n;
    m.eval_acc = evaluate(cfg, w, eval_set, scorer, schedule);
    metrics.push_back(m);
  }
  return metrics;
}

}  // namespace

std::vector<EpochMetrics> train(const ModelConfig& cfg, ModelWeights& w, const Dataset& train_set,
                                const Dataset& eval_set, const TrainConfig& tc,
                                const ScorerConfig* scorer, const PruneSchedule* schedule) {
  return run_sgd(cfg, w, train_set, eval_set, tc, tc.learning_rate, scorer, schedule);
}

std::vector<EpochMetrics> finetune_pruned(const ModelConfig& cfg, ModelWeights& w,
                                          const Dataset& train_set, const Dataset& eval_set,
                                          const TrainConfig& tc, const ScorerConfig& scorer,
                                          const PruneSchedule& schedule) {
  return run_sgd(cfg, w, train_set, eval_set, tc, tc.learning_rate * tc.finetune_lr_factor,
                 &scorer, &schedule);
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,eval_acc\n";
  for (const EpochMetrics& m : metrics) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", m.epoch, m.train_loss, m.train_acc,
                  m.eval_acc);
    os << buf;
  }
  return os.str();
}

}  // namespace sp
