#include "spikeprune/io.hpp"

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sp {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + context);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ResetMode parse_reset(const std::string& s) {
  if (s == "hard") return ResetMode::hard;
  if (s == "soft") return ResetMode::soft;
  throw std::invalid_argument("config: neuron.reset must be \"hard\" or \"soft\"");
}

TemporalNorm parse_norm(const std::string& s) {
  if (s == "l1") return TemporalNorm::l1;
  if (s == "l2") return TemporalNorm::l2;
  throw std::invalid_argument("config: scorer.temporal_norm must be \"l1\" or \"l2\"");
}

}  // namespace

std::string config_fingerprint(const std::string& json_text) {
  uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : json_text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& json_text) {
  json j = json::parse(json_text);
  reject_unknown(j, {"model", "scorer", "schedule", "train", "search", "data"}, "config root");
  RunConfig rc;
  rc.fingerprint = config_fingerprint(json_text);

  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown(m,
                   {"time_steps", "input_h", "input_w", "input_c", "patch", "embed_dim", "heads",
                    "num_blocks", "mlp_ratio", "classes", "attn_scale", "merge_stage", "neuron"},
                   "model");
    get_if(m, "time_steps", rc.model.time_steps);
    get_if(m, "input_h", rc.model.input_h);
    get_if(m, "input_w", rc.model.input_w);
    get_if(m, "input_c", rc.model.input_c);
    get_if(m, "patch", rc.model.patch);
    get_if(m, "embed_dim", rc.model.embed_dim);
    get_if(m, "heads", rc.model.heads);
    get_if(m, "num_blocks", rc.model.num_blocks);
    get_if(m, "mlp_ratio", rc.model.mlp_ratio);
    get_if(m, "classes", rc.model.classes);
    get_if(m, "attn_scale", rc.model.attn_scale);
    get_if(m, "merge_stage", rc.model.merge_stage);
    if (m.contains("neuron")) {
      const json& n = m["neuron"];
      reject_unknown(n, {"tau", "theta", "beta", "reset"}, "model.neuron");
      get_if(n, "tau", rc.model.neuron.tau);
      get_if(n, "theta", rc.model.neuron.theta);
      get_if(n, "beta", rc.model.neuron.beta);
      if (n.contains("reset")) rc.model.neuron.reset = parse_reset(n["reset"].get<std::string>());
    }
  }
  rc.model.validate();

  if (j.contains("scorer")) {
    const json& s = j["scorer"];
    reject_unknown(s, {"window_k", "alpha", "spatial_only_first_step", "temporal_norm"},
                   "scorer");
    get_if(s, "window_k", rc.scorer.window_k);
    get_if(s, "alpha", rc.scorer.alpha);
    get_if(s, "spatial_only_first_step", rc.scorer.spatial_only_first_step);
    if (s.contains("temporal_norm"))
      rc.scorer.norm_kind = parse_norm(s["temporal_norm"].get<std::string>());
    if (rc.scorer.window_k < 1 || rc.scorer.window_k % 2 == 0)
      throw std::invalid_argument("config: scorer.window_k must be odd and >= 1");
    if (rc.scorer.alpha < 0.0 || rc.scorer.alpha > 1.0)
      throw std::invalid_argument("config: scorer.alpha must lie in [0, 1]");
  }

  if (j.contains("schedule") && !(j["schedule"].is_string() && j["schedule"] == "none")) {
    PruneSchedule s;
    s.ratios = j["schedule"].get<std::vector<double>>();
    if (static_cast<int>(s.ratios.size()) != rc.model.num_blocks)
      throw std::invalid_argument("config: schedule length " + std::to_string(s.ratios.size()) +
                                  " does not match num_blocks " +
                                  std::to_string(rc.model.num_blocks));
    for (double r : s.ratios)
      if (r <= 0.0 || r > 1.0)
        throw std::invalid_argument("config: schedule ratios must lie in (0, 1]");
    rc.schedule = std::move(s);
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t,
                   {"epochs", "batch_size", "learning_rate", "momentum", "seed",
                    "finetune_lr_factor"},
                   "train");
    get_if(t, "epochs", rc.train.epochs);
    get_if(t, "batch_size", rc.train.batch_size);
    get_if(t, "learning_rate", rc.train.learning_rate);
    get_if(t, "momentum", rc.train.momentum);
    get_if(t, "seed", rc.train.seed);
    get_if(t, "finetune_lr_factor", rc.train.finetune_lr_factor);
    if (rc.train.learning_rate <= 0.0)
      throw std::invalid_argument("config: train.learning_rate must be > 0");
    if (rc.train.batch_size < 1)
      throw std::invalid_argument("config: train.batch_size must be >= 1");
  }

  if (j.contains("search")) {
    const json& s = j["search"];
    reject_unknown(s, {"candidate_ratios", "target_avg", "tolerance"}, "search");
    get_if(s, "candidate_ratios", rc.search.candidate_ratios);
    get_if(s, "target_avg", rc.search.target_avg);
    get_if(s, "tolerance", rc.search.tolerance);
  }

  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d,
                   {"classes", "train_samples", "eval_samples", "noise", "seed", "height",
                    "width", "channels", "dir"},
                   "data");
    get_if(d, "classes", rc.data.classes);
    get_if(d, "train_samples", rc.data.train_samples);
    get_if(d, "eval_samples", rc.data.eval_samples);
    get_if(d, "noise", rc.data.noise);
    get_if(d, "seed", rc.data.seed);
    get_if(d, "height", rc.data.height);
    get_if(d, "width", rc.data.width);
    get_if(d, "channels", rc.data.channels);
    if (d.contains("dir")) rc.data_dir = d["dir"].get<std::string>();
  }

  if (const char* env = std::getenv("SPIKEPRUNE_SEED")) {
    rc.train.seed = std::strtoull(env, nullptr, 10);
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config(os.str());
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'K', 'W'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!is) throw std::runtime_error("weight archive: truncated file");
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

void put_f32(std::ostream& os, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put<uint32_t>(os, bits);
}

float get_f32(std::istream& is) {
  uint32_t bits = get<uint32_t>(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_weights(const ModelWeights& w, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(kMagic, 4);
  put<uint16_t>(f, kVersion);
  uint32_t count = 0;
  w.for_each_param([&](const std::string&, const Tensor&) { ++count; });
  put<uint32_t>(f, count);
  w.for_each_param([&](const std::string& name, const Tensor& t) {
    put<uint16_t>(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(f, 0);  // dtype f32
    put<uint8_t>(f, static_cast<uint8_t>(t.ndim()));
    for (int d : t.shape) put<uint32_t>(f, static_cast<uint32_t>(d));
  });
  w.for_each_param([&](const std::string&, const Tensor& t) {
    for (double v : t.data) put_f32(f, static_cast<float>(v));
  });
  if (!f) throw std::runtime_error("weight archive: write failed for " + path);
}

void load_weights(ModelWeights& w, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open weights " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("weight archive: bad magic in " + path);
  if (get<uint16_t>(f) != kVersion)
    throw std::runtime_error("weight archive: unsupported version in " + path);
  const uint32_t count = get<uint32_t>(f);

  struct Entry {
    std::string name;
    Shape shape;
  };
  std::vector<Entry> entries;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    const uint16_t len = get<uint16_t>(f);
    e.name.resize(len);
    f.read(e.name.data(), len);
    if (!f) throw std::runtime_error("weight archive: truncated file");
    if (get<uint8_t>(f) != 0) throw std::runtime_error("weight archive: unsupported dtype");
    const uint8_t nd = get<uint8_t>(f);
    for (uint8_t d = 0; d < nd; ++d) e.shape.push_back(static_cast<int>(get<uint32_t>(f)));
    entries.push_back(std::move(e));
  }

  size_t next = 0;
  w.for_each_param([&](const std::string& name, Tensor& t) {
    if (next >= entries.size())
      throw std::runtime_error("weight archive: missing entry " + name);
    const Entry& e = entries[next++];
    if (e.name != name)
      throw std::runtime_error("weight archive: expected entry " + name + ", found " + e.name);
    if (e.shape != t.shape)
      throw std::runtime_error("weight archive: shape mismatch for " + name + " (archive " +
                               shape_str(e.shape) + ", model " + shape_str(t.shape) + ")");
  });
  if (next != entries.size()) throw std::runtime_error("weight archive: extra entries");

  w.for_each_param([&](const std::string&, Tensor& t) {
    for (double& v : t.data) v = static_cast<double>(get_f32(f));
  });
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["count"] = ds.samples.size();
  if (!ds.samples.empty()) {
    const Tensor& img = ds.samples[0].image;
    manifest["height"] = img.dim(0);
    manifest["width"] = img.dim(1);
    manifest["channels"] = img.dim(2);
  } else {
    manifest["height"] = 0;
    manifest["width"] = 0;
    manifest["channels"] = 0;
  }
  std::vector<int> labels;
  for (const Sample& s : ds.samples) labels.push_back(s.label);
  manifest["labels"] = labels;
  std::ofstream mf(dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";

  std::ofstream imf(dir + "/images.f32", std::ios::binary);
  for (const Sample& s : ds.samples)
    for (double v : s.image.data) put_f32(imf, static_cast<float>(v));
  if (!imf) throw std::runtime_error("dataset: write failed in " + dir);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot open " + dir + "/manifest.json");
  json manifest = json::parse(mf);
  const int count = manifest.at("count").get<int>();
  const int h = manifest.at("height").get<int>();
  const int w = manifest.at("width").get<int>();
  const int c = manifest.at("channels").get<int>();
  std::vector<int> labels = manifest.at("labels").get<std::vector<int>>();
  if (static_cast<int>(labels.size()) != count)
    throw std::runtime_error("dataset: label count mismatch in " + dir);

  std::ifstream imf(dir + "/images.f32", std::ios::binary);
  if (!imf) throw std::runtime_error("cannot open " + dir + "/images.f32");
  Dataset ds;
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.image = Tensor({h, w, c});
    for (double& v : s.image.data) v = static_cast<double>(get_f32(imf));
    s.label = labels[static_cast<size_t>(i)];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_schedule(const PruneSchedule& s, double batch_accuracy, const std::string& path,
                   const std::string& fingerprint) {
  json j;
  j["schedule"] = s.ratios;
  j["batch_accuracy"] = batch_accuracy;
  if (!fingerprint.empty()) j["config_fingerprint"] = fingerprint;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

PruneSchedule load_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open schedule " + path);
  json j = json::parse(f);
  PruneSchedule s;
  s.ratios = j.at("schedule").get<std::vector<double>>();
  return s;
}

Dataset train_split(const RunConfig& rc) {
  if (rc.data_dir) return load_dataset(*rc.data_dir + "/train");
  return make_synthetic(rc.data, rc.data.train_samples, rc.data.seed);
}

Dataset eval_split(const RunConfig& rc) {
  if (rc.data_dir) return load_dataset(*rc.data_dir + "/eval");
  return make_synthetic(rc.data, rc.data.eval_samples, rc.data.seed + 1);
}

}  // namespace sp
