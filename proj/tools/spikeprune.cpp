// Command-line surface: training, evaluation, schedule search, energy
// accounting, mask dumps, and synthetic data generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "spikeprune/io.hpp"
#include "spikeprune/metrics.hpp"
#include "spikeprune/model.hpp"
#include "spikeprune/search.hpp"
#include "spikeprune/training.hpp"

namespace {

using namespace sp;

// "--schedule none", a schedule JSON path, or fall back to the config.
std::optional<PruneSchedule> resolve_schedule(const std::string& arg, const RunConfig& rc) {
  if (arg == "none") return std::nullopt;
  if (!arg.empty()) return load_schedule(arg);
  return rc.schedule;
}

ModelWeights load_model(const RunConfig& rc, const std::string& weights_path) {
  Rng rng(rc.train.seed);
  ModelWeights w = ModelWeights::init(rc.model, rng);
  load_weights(w, weights_path);
  return w;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
}

int cmd_train(const std::string& config_path, const std::string& out,
              const std::string& metrics_path) {
  RunConfig rc = load_config(config_path);
  Dataset tr = train_split(rc), ev = eval_split(rc);
  Rng rng(rc.train.seed);
  ModelWeights w = ModelWeights::init(rc.model, rng);
  auto metrics = train(rc.model, w, tr, ev, rc.train);
  save_weights(w, out);
  const std::string csv = metrics_csv(metrics);
  if (!metrics_path.empty())
    write_text(metrics_path, csv);
  else
    std::cout << csv;
  std::printf("# config_fingerprint %s\n", rc.fingerprint.c_str());
  std::printf("final train_acc %.4f eval_acc %.4f\n", metrics.back().train_acc,
              metrics.back().eval_acc);
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& weights_path,
             const std::string& schedule_arg, int batch) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  auto schedule = resolve_schedule(schedule_arg, rc);
  Dataset ev = eval_split(rc);
  const int n = batch > 0 ? std::min<int>(batch, (int)ev.samples.size()) : (int)ev.samples.size();

  std::vector<int> correct(static_cast<size_t>(rc.model.classes), 0);
  std::vector<int> total(static_cast<size_t>(rc.model.classes), 0);
  ForwardOptions opt;
  opt.scorer = &rc.scorer;
  opt.schedule = schedule ? &*schedule : nullptr;
  int right = 0;
  for (int i = 0; i < n; ++i) {
    const Sample& s = ev.samples[static_cast<size_t>(i)];
    Tensor logits = model_forward(rc.model, w, s.image, opt);
    total[static_cast<size_t>(s.label)] += 1;
    if (argmax_logit(logits) == s.label) {
      correct[static_cast<size_t>(s.label)] += 1;
      ++right;
    }
  }
  std::printf("# config_fingerprint %s\n", rc.fingerprint.c_str());
  std::printf("accuracy %.9g\n", double(right) / n);
  for (int c = 0; c < rc.model.classes; ++c)
    std::printf("class %d %d/%d\n", c, correct[static_cast<size_t>(c)],
                total[static_cast<size_t>(c)]);
  return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& weights_path,
                 const std::string& schedule_arg, const std::string& out, int epochs) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  auto schedule = resolve_schedule(schedule_arg, rc);
  if (!schedule) throw std::runtime_error("finetune: a schedule is required");
  TrainConfig tc = rc.train;
  if (epochs > 0) tc.epochs = epochs;
  Dataset tr = train_split(rc), ev = eval_split(rc);
  auto metrics = finetune_pruned(rc.model, w, tr, ev, tc, rc.scorer, *schedule);
  save_weights(w, out);
  std::cout << metrics_csv(metrics);
  std::printf("# config_fingerprint %s\n", rc.fingerprint.c_str());
  return 0;
}

int cmd_search(const std::string& config_path, const std::string& weights_path,
               double target_avg, int batch, const std::string& out_csv,
               const std::string& out_json) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  SearchSpace space = rc.search;
  if (target_avg > 0) space.target_avg = target_avg;
  Dataset ev = eval_split(rc);
  Dataset batch_set;
  const int n = batch > 0 ? std::min<int>(batch, (int)ev.samples.size()) : (int)ev.samples.size();
  batch_set.samples.assign(ev.samples.begin(), ev.samples.begin() + n);

  SearchReport report = search(rc.model, w, batch_set, rc.scorer, space);
  const std::string csv = search_report_csv(report);
  if (!out_csv.empty())
    write_text(out_csv, csv);
  else
    std::cout << csv;
  if (!out_json.empty())
    save_schedule(report.best.schedule, report.best.batch_accuracy, out_json, rc.fingerprint);
  std::printf("# config_fingerprint %s\n", rc.fingerprint.c_str());
  std::printf("best_accuracy %.9g mean_ratio %.9g\n", report.best.batch_accuracy,
              report.best.mean_ratio);
  return 0;
}

int cmd_energy(const std::string& config_path, const std::string& weights_path,
               const std::string& schedule_arg, int samples, const std::string& out) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  auto schedule = resolve_schedule(schedule_arg, rc);
  Dataset ev = eval_split(rc);
  const int n = std::min<int>(samples, (int)ev.samples.size());

  RunStats stats;
  ForwardOptions opt;
  opt.scorer = &rc.scorer;
  opt.schedule = schedule ? &*schedule : nullptr;
  opt.stats = &stats;
  for (int i = 0; i < n; ++i)
    model_forward(rc.model, w, ev.samples[static_cast<size_t>(i)].image, opt);

  EnergyConstants constants;
  EnergyReport rep = energy_report(
      stats, constants, schedule ? schedule->ratios : PruneSchedule::all_ones(rc.model.num_blocks).ratios);
  const std::string text = energy_report_json(rep, rc.fingerprint);
  if (!out.empty())
    write_text(out, text + "\n");
  else
    std::cout << text << "\n";
  return 0;
}

int cmd_masks(const std::string& config_path, const std::string& weights_path,
              const std::string& schedule_arg, const std::string& input, int index,
              const std::string& out_dir) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  auto schedule = resolve_schedule(schedule_arg, rc);
  if (!schedule) throw std::runtime_error("masks: a schedule is required");

  Tensor image;
  if (std::filesystem::is_directory(input)) {
    Dataset ds = load_dataset(input);
    if (index < 0 || index >= static_cast<int>(ds.samples.size()))
      throw std::runtime_error("masks: --index out of range");
    image = ds.samples[static_cast<size_t>(index)].image;
  } else {
    std::ifstream f(input, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open input image " + input);
    image = Tensor({rc.model.input_h, rc.model.input_w, rc.model.input_c});
    for (double& v : image.data) {
      float fv;
      f.read(reinterpret_cast<char*>(&fv), 4);
      if (!f) throw std::runtime_error("masks: input image file too short");
      v = fv;
    }
  }

  std::filesystem::create_directories(out_dir);
  PruneTrace trace;
  ForwardOptions opt;
  opt.trace = &trace;
  model_forward_pruned(rc.model, w, image, rc.scorer, *schedule, opt);
  for (const PruneTraceEntry& e : trace.entries) {
    const int h = e.scores.scores.dim(0), wd = e.scores.scores.dim(1);
    char base[64];
    std::snprintf(base, sizeof base, "/block%d_t%d", e.block, e.t);
    write_score_csv(out_dir + base + "_scores.csv", e.scores.scores);
    write_score_pgm(out_dir + base + "_scores.pgm", e.scores.scores);
    write_mask_csv(out_dir + base + "_mask.csv", e.part, h, wd);
    write_mask_pgm(out_dir + base + "_mask.pgm", e.part, h, wd);
  }
  std::printf("wrote %zu (block, step) dumps to %s\n", trace.entries.size(), out_dir.c_str());
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& weights_path,
              const std::string& schedule_arg, int batch, int reps) {
  RunConfig rc = load_config(config_path);
  ModelWeights w = load_model(rc, weights_path);
  auto schedule = resolve_schedule(schedule_arg, rc);
  Dataset ev = eval_split(rc);
  const int n = std::min<int>(batch, (int)ev.samples.size());
  ForwardOptions opt;
  opt.scorer = &rc.scorer;
  opt.schedule = schedule ? &*schedule : nullptr;
  const double rate = throughput(
      [&] {
        for (int i = 0; i < n; ++i)
          model_forward(rc.model, w, ev.samples[static_cast<size_t>(i)].image, opt);
      },
      n, reps);
  std::printf("throughput %.3f images/s (batch %d, reps %d)\n", rate, n, reps);
  return 0;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
  RunConfig rc = load_config(spec_path);
  save_dataset(make_synthetic(rc.data, rc.data.train_samples, rc.data.seed), out_dir + "/train");
  save_dataset(make_synthetic(rc.data, rc.data.eval_samples, rc.data.seed + 1),
               out_dir + "/eval");
  std::printf("wrote %d train / %d eval samples to %s\n", rc.data.train_samples,
              rc.data.eval_samples, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking-transformer token pruning engine"};
  app.require_subcommand(1);

  std::string config, weights, out, schedule_arg, metrics_path, input, out_csv, out_json;
  int batch = 0, reps = 5, samples = 16, index = 0, epochs = 0;
  double target_avg = 0;

  auto* train_cmd = app.add_subcommand("train", "train the unpruned baseline");
  train_cmd->add_option("--config", config)->required();
  train_cmd->add_option("--out", out)->required();
  train_cmd->add_option("--metrics", metrics_path);

  auto* eval_cmd = app.add_subcommand("eval", "accuracy and per-class report");
  eval_cmd->add_option("--config", config)->required();
  eval_cmd->add_option("--weights", weights)->required();
  eval_cmd->add_option("--schedule", schedule_arg);
  eval_cmd->add_option("--batch", batch);

  auto* ft_cmd = app.add_subcommand("finetune", "reduced-rate pruned fine-tune");
  ft_cmd->add_option("--config", config)->required();
  ft_cmd->add_option("--weights", weights)->required();
  ft_cmd->add_option("--schedule", schedule_arg);
  ft_cmd->add_option("--out", out)->required();
  ft_cmd->add_option("--epochs", epochs);

  auto* search_cmd = app.add_subcommand("search", "grid search over retention schedules");
  search_cmd->add_option("--config", config)->required();
  search_cmd->add_option("--weights", weights)->required();
  search_cmd->add_option("--target-avg", target_avg);
  search_cmd->add_option("--batch", batch);
  search_cmd->add_option("--out-csv", out_csv);
  search_cmd->add_option("--out-json", out_json);

  auto* energy_cmd = app.add_subcommand("energy", "SOPs and picojoule report");
  energy_cmd->add_option("--config", config)->required();
  energy_cmd->add_option("--weights", weights)->required();
  energy_cmd->add_option("--schedule", schedule_arg);
  energy_cmd->add_option("--samples", samples);
  energy_cmd->add_option("--out", out);

  auto* masks_cmd = app.add_subcommand("masks", "keep-mask and score heatmap dumps");
  masks_cmd->add_option("--config", config)->required();
  masks_cmd->add_option("--weights", weights)->required();
  masks_cmd->add_option("--schedule", schedule_arg);
  masks_cmd->add_option("--input", input)->required();
  masks_cmd->add_option("--index", index);
  masks_cmd->add_option("--out", out)->required();

  auto* bench_cmd = app.add_subcommand("bench", "wall-clock throughput");
  bench_cmd->add_option("--config", config)->required();
  bench_cmd->add_option("--weights", weights)->required();
  bench_cmd->add_option("--schedule", schedule_arg);
  bench_cmd->add_option("--batch", batch)->default_val(32);
  bench_cmd->add_option("--reps", reps);

  auto* gen_cmd = app.add_subcommand("gen-data", "emit a synthetic dataset");
  gen_cmd->add_option("--spec", config)->required();
  gen_cmd->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config, out, metrics_path);
    if (eval_cmd->parsed()) return cmd_eval(config, weights, schedule_arg, batch);
    if (ft_cmd->parsed()) return cmd_finetune(config, weights, schedule_arg, out, epochs);
    if (search_cmd->parsed())
      return cmd_search(config, weights, target_avg, batch, out_csv, out_json);
    if (energy_cmd->parsed()) return cmd_energy(config, weights, schedule_arg, samples, out);
    if (masks_cmd->parsed())
      return cmd_masks(config, weights, schedule_arg, input, index, out);
    if (bench_cmd->parsed()) return cmd_bench(config, weights, schedule_arg, batch, reps);
    if (gen_cmd->parsed()) return cmd_gen_data(config, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spikeprune: %s\n", e.what());
    return 1;
  }
  return 1;
}
