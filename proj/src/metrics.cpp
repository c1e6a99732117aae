#include "spikeprune/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sp {

long long flops_linear(int rows, int k, int n) {
  return static_cast<long long>(rows) * k * n;
}

long long flops_conv(int hout, int wout, int cout, int cin, int k) {
  return static_cast<long long>(hout) * wout * cout * cin * k * k;
}

long long flops_attention(int heads, int n, int d_head) {
  return 2LL * heads * n * n * d_head;
}

double measure_firing_rate(const Tensor& spikes) {
  if (spikes.numel() == 0) return 0.0;
  double s = 0.0;
  for (double v : spikes.data) s += v;
  return s / spikes.numel();
}

void RunStats::add(const std::string& name, double macs, double spike_sum, double elems,
                   Billing billing) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    index_.emplace(name, layers.size());
    layers.push_back({name, macs, spike_sum, elems, billing});
  } else {
    LayerAgg& a = layers[it->second];
    a.macs += macs;
    a.spike_sum += spike_sum;
    a.elems += elems;
  }
}

void RunStats::merge(const RunStats& other) {
  samples += other.samples;
  for (const LayerAgg& a : other.layers) add(a.name, a.macs, a.spike_sum, a.elems, a.billing);
}

EnergyReport energy_report(const RunStats& stats, const EnergyConstants& constants,
                           const std::vector<double>& schedule) {
  EnergyReport rep;
  rep.schedule = schedule;
  if (!schedule.empty()) {
    double s = 0;
    for (double r : schedule) s += r;
    rep.retained_avg = s / static_cast<double>(schedule.size());
  }
  const double norm = std::max(1.0, stats.samples) * std::max(1, stats.time_steps);
  for (const RunStats::LayerAgg& a : stats.layers) {
    LayerStats l;
    l.name = a.name;
    l.billing = a.billing;
    l.flops = a.macs / norm;
    l.firing_rate = (a.elems > 0) ? a.spike_sum / a.elems : 0.0;
    l.sops = l.firing_rate * stats.time_steps * l.flops;
    l.energy_pj = (a.billing == Billing::mac) ? constants.e_mac * l.flops
                                              : constants.e_ac * l.sops;
    rep.layers.push_back(l);
  }
  for (const LayerStats& l : rep.layers) rep.total_pj += l.energy_pj;
  rep.total_mj = rep.total_pj * 1e-9;
  return rep;
}

double recompute_total_pj(const EnergyReport& report, const EnergyConstants& constants) {
  double total = 0;
  for (const LayerStats& l : report.layers) {
    total += (l.billing == Billing::mac) ? constants.e_mac * l.flops : constants.e_ac * l.sops;
  }
  return total;
}

std::string energy_report_json(const EnergyReport& report, const std::string& fingerprint) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const LayerStats& l : report.layers) {
    j["layers"].push_back({{"name", l.name},
                           {"flops", l.flops},
                           {"firing_rate", l.firing_rate},
                           {"sops", l.sops},
                           {"energy_pj", l.energy_pj},
                           {"billing", l.billing == Billing::mac ? "mac" : "ac"}});
  }
  j["total_pj"] = report.total_pj;
  j["total_mj"] = report.total_mj;
  j["schedule"] = report.schedule;
  j["retained_avg"] = report.retained_avg;
  if (!fingerprint.empty()) j["config_fingerprint"] = fingerprint;
  return j.dump(2);
}

double throughput(const std::function<void()>& batch_fn, int batch_size, int repetitions) {
  if (repetitions < 1) throw std::invalid_argument("throughput: repetitions < 1");
  batch_fn();  // warm-up
  std::vector<double> rates;
  rates.reserve(static_cast<size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    batch_fn();
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    rates.push_back(batch_size / std::max(sec, 1e-12));
  }
  std::sort(rates.begin(), rates.end());
  const size_t mid = rates.size() / 2;
  if (rates.size() % 2 == 1) return rates[mid];
  return 0.5 * (rates[mid - 1] + rates[mid]);
}

}  // namespace sp
