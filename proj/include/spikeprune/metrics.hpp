#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spikeprune/tensor.hpp"

namespace sp {

// 45nm per-op energies, picojoules.
struct EnergyConstants {
  double e_mac = 4.6;
  double e_ac = 0.9;
};

enum class Billing { mac, ac };

// Closed-form MAC counts.
long long flops_linear(int rows, int k, int n);
long long flops_conv(int hout, int wout, int cout, int cin, int k);
long long flops_attention(int heads, int n, int d_head);  // qk^T plus (.)v

double measure_firing_rate(const Tensor& spikes);

// Per-run accumulator. Layers keyed by name, insertion-ordered; add() is
// called once per (layer, time step, sample) with the MACs actually performed
// and the spike statistics of the layer's input. Bypassed tokens never reach
// add(), so they are excluded from both numerator and denominator.
struct RunStats {
  int time_steps = 1;
  double samples = 0;

  void add(const std::string& name, double macs, double spike_sum, double elems,
           Billing billing);
  void merge(const RunStats& other);  // associative reduce across parallel runs

  struct LayerAgg {
    std::string name;
    double macs = 0;
    double spike_sum = 0;
    double elems = 0;
    Billing billing = Billing::ac;
  };
  std::vector<LayerAgg> layers;

 private:
  std::unordered_map<std::string, size_t> index_;
};

struct LayerStats {
  std::string name;
  double flops = 0;        // per-step per-sample MACs for the layer shape
  double firing_rate = 0;  // mean spike probability of the layer's input
  double sops = 0;         // firing_rate * T * flops
  double energy_pj = 0;
  Billing billing = Billing::ac;
};

struct EnergyReport {
  std::vector<LayerStats> layers;
  double total_pj = 0;
  double total_mj = 0;
  std::vector<double> schedule;
  double retained_avg = 1.0;
};

// MAC-billed layers cost e_mac * flops (once, per the first-conv convention);
// spike-driven layers cost e_ac * sops.
EnergyReport energy_report(const RunStats& stats, const EnergyConstants& constants,
                           const std::vector<double>& schedule);

// Re-derives every layer energy and the total from the per-layer fields;
// equal to report.total_pj when the report is internally consistent.
double recompute_total_pj(const EnergyReport& report, const EnergyConstants& constants);

std::string energy_report_json(const EnergyReport& report, const std::string& fingerprint);

// Median images/second over `repetitions` timed passes after one warm-up.
double throughput(const std::function<void()>& batch_fn, int batch_size, int repetitions);

}  // namespace sp
