#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "spikeprune/io.hpp"

using namespace sp;
namespace fs = std::filesystem;

namespace {

const std::string kTmp = fs::temp_directory_path() / "spikeprune_io_test";

struct TmpDir {
  TmpDir() {
    fs::remove_all(kTmp);
    fs::create_directories(kTmp);
  }
  ~TmpDir() { fs::remove_all(kTmp); }
};

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.time_steps = 2;
  cfg.input_h = 8;
  cfg.input_w = 8;
  cfg.patch = 2;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.num_blocks = 1;
  cfg.mlp_ratio = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing: defaults, overrides, strictness") {
  RunConfig rc = parse_config("{}");
  CHECK(rc.model.time_steps == 4);
  CHECK(rc.model.embed_dim == 32);
  CHECK(rc.scorer.alpha == 0.5);
  CHECK(!rc.schedule.has_value());
  CHECK(rc.fingerprint.size() == 16);

  rc = parse_config(R"({
    "model": {"time_steps": 2, "embed_dim": 16, "heads": 2, "num_blocks": 2,
              "neuron": {"tau": 0.25, "reset": "hard"}},
    "scorer": {"alpha": 0.7, "temporal_norm": "l2"},
    "schedule": [0.9, 0.64],
    "train": {"epochs": 5, "seed": 9},
    "data": {"train_samples": 32}
  })");
  CHECK(rc.model.time_steps == 2);
  CHECK(rc.model.neuron.tau == 0.25);
  CHECK(rc.model.neuron.reset == ResetMode::hard);
  CHECK(rc.scorer.alpha == 0.7);
  CHECK(rc.scorer.norm_kind == TemporalNorm::l2);
  REQUIRE(rc.schedule.has_value());
  CHECK(rc.schedule->ratios == std::vector<double>{0.9, 0.64});
  CHECK(rc.train.epochs == 5);
  CHECK(rc.train.seed == 9);
  CHECK(rc.data.train_samples == 32);

  // "schedule": "none" clears it
  rc = parse_config(R"({"schedule": "none"})");
  CHECK(!rc.schedule.has_value());
}

TEST_CASE("config parsing rejects unknown keys by name") {
  try {
    parse_config(R"({"model": {"embeddim": 16}})");
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("embeddim") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), std::invalid_argument);
}

TEST_CASE("config cross-field validation") {
  // schedule length vs num_blocks
  CHECK_THROWS_AS(parse_config(R"({"model": {"num_blocks": 2}, "schedule": [0.9]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"schedule": [0.9, 1.5]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"model": {"patch": 5}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"scorer": {"window_k": 2}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"scorer": {"alpha": 1.5}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"train": {"learning_rate": 0}})"), std::invalid_argument);
}

TEST_CASE("SPIKEPRUNE_SEED overrides the configured seed") {
  setenv("SPIKEPRUNE_SEED", "424242", 1);
  RunConfig rc = parse_config(R"({"train": {"seed": 9}})");
  CHECK(rc.train.seed == 424242);
  unsetenv("SPIKEPRUNE_SEED");
  rc = parse_config(R"({"train": {"seed": 9}})");
  CHECK(rc.train.seed == 9);
}

TEST_CASE("fingerprint is deterministic and content sensitive") {
  const std::string a = config_fingerprint("{}");
  CHECK(a == config_fingerprint("{}"));
  CHECK(a != config_fingerprint("{ }"));
  CHECK(a.size() == 16);
  for (char c : a) CHECK(std::isxdigit(static_cast<unsigned char>(c)));
}

TEST_CASE("weights round-trip at f32 precision") {
  TmpDir tmp;
  ModelConfig cfg = tiny_config();
  Rng rng(3);
  ModelWeights w = ModelWeights::init(cfg, rng);
  const std::string path = kTmp + "/w.spkw";
  save_weights(w, path);

  Rng rng2(99);
  ModelWeights r = ModelWeights::init(cfg, rng2);
  load_weights(r, path);
  std::vector<const Tensor*> orig;
  w.for_each_param([&](const std::string&, Tensor& t) { orig.push_back(&t); });
  size_t i = 0;
  r.for_each_param([&](const std::string&, Tensor& t) {
    for (int k = 0; k < t.numel(); ++k)
      CHECK(t.at(k) == double(float(orig[i]->at(k))));
    ++i;
  });

  // shape mismatch is detected
  ModelConfig other = cfg;
  other.embed_dim = 16;
  Rng rng3(1);
  ModelWeights wrong = ModelWeights::init(other, rng3);
  CHECK_THROWS_AS(load_weights(wrong, path), std::runtime_error);
}

TEST_CASE("weight archive corruption is rejected") {
  TmpDir tmp;
  ModelConfig cfg = tiny_config();
  Rng rng(3);
  ModelWeights w = ModelWeights::init(cfg, rng);
  const std::string path = kTmp + "/w.spkw";
  save_weights(w, path);

  // truncated
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(kTmp + "/trunc.spkw", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  ModelWeights r = ModelWeights::init(cfg, rng);
  CHECK_THROWS_AS(load_weights(r, kTmp + "/trunc.spkw"), std::runtime_error);

  // bad magic
  {
    std::ofstream out(kTmp + "/bad.spkw", std::ios::binary);
    out << "NOPE-this-is-not-an-archive";
  }
  CHECK_THROWS_AS(load_weights(r, kTmp + "/bad.spkw"), std::runtime_error);
  CHECK_THROWS_AS(load_weights(r, kTmp + "/missing.spkw"), std::runtime_error);
}

TEST_CASE("dataset round-trip") {
  TmpDir tmp;
  DataConfig dc;
  dc.height = 8;
  dc.width = 8;
  Dataset ds = make_synthetic(dc, 6, 5);
  save_dataset(ds, kTmp + "/data");
  Dataset r = load_dataset(kTmp + "/data");
  REQUIRE(r.samples.size() == 6);
  for (size_t i = 0; i < r.samples.size(); ++i) {
    CHECK(r.samples[i].label == ds.samples[i].label);
    CHECK(r.samples[i].image.shape == ds.samples[i].image.shape);
    for (int k = 0; k < r.samples[i].image.numel(); ++k)
      CHECK(r.samples[i].image.at(k) == double(float(ds.samples[i].image.at(k))));
  }
  CHECK_THROWS_AS(load_dataset(kTmp + "/nonexistent"), std::runtime_error);
}

TEST_CASE("schedule round-trip") {
  TmpDir tmp;
  PruneSchedule s;
  s.ratios = {0.9, 0.64, 0.49};
  save_schedule(s, 0.9375, kTmp + "/sched.json", "cafecafecafecafe");
  PruneSchedule r = load_schedule(kTmp + "/sched.json");
  CHECK(r.ratios == s.ratios);
}

TEST_CASE("splits honor data_dir") {
  TmpDir tmp;
  RunConfig rc = parse_config(R"({"data": {"height": 8, "width": 8,
                                  "train_samples": 4, "eval_samples": 2}})");
  Dataset tr = train_split(rc), ev = eval_split(rc);
  CHECK(tr.samples.size() == 4);
  CHECK(ev.samples.size() == 2);
  // eval uses a different seed stream than train
  bool differs = false;
  for (int k = 0; k < tr.samples[0].image.numel(); ++k)
    if (tr.samples[0].image.at(k) != ev.samples[0].image.at(k)) differs = true;
  CHECK(differs);

  save_dataset(tr, kTmp + "/d/train");
  save_dataset(ev, kTmp + "/d/eval");
  RunConfig rc2 = rc;
  rc2.data_dir = kTmp + "/d";
  Dataset tr2 = train_split(rc2), ev2 = eval_split(rc2);
  CHECK(tr2.samples.size() == 4);
  CHECK(ev2.samples.size() == 2);
  for (int k = 0; k < 8; ++k)
    CHECK(tr2.samples[0].image.at(k) == double(float(tr.samples[0].image.at(k))));
}
