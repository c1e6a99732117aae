#include "spikeprune/model.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace sp {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (time_steps < 1) fail("time_steps must be >= 1");
  if (num_blocks < 1) fail("num_blocks must be >= 1");
  if (embed_dim < 1 || embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (classes < 2) fail("classes must be >= 2");
  if (patch < 1 || input_h % patch != 0 || input_w % patch != 0)
    fail("input extent must be divisible by patch");
  if (merge_stage) {
    if (num_blocks < 2) fail("merge_stage needs num_blocks >= 2");
    if (grid_h() % 2 != 0 || grid_w() % 2 != 0) fail("merge_stage needs an even token grid");
  }
  if (neuron.tau <= 0.0 || neuron.tau > 1.0) fail("tau must lie in (0, 1]");
  if (neuron.theta <= 0.0) fail("theta must be > 0");
  if (neuron.beta <= 0.0) fail("beta must be > 0");
}

namespace {

Tensor randn(Shape s, double std, Rng& rng) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = std * rng.normal();
  return t;
}

Affine unit_affine(int c) {
  Affine a;
  a.gain = Tensor::full({c}, 1.0);
  a.shift = Tensor::zeros({c});
  return a;
}

}  // namespace

ModelWeights ModelWeights::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelWeights w;
  const int d = cfg.embed_dim;
  w.embed_conv = randn({cfg.patch, cfg.patch, cfg.input_c, d},
                       2.0 / std::sqrt(double(cfg.patch * cfg.patch * cfg.input_c)), rng);
  w.embed_aff = unit_affine(d);
  w.embed_dw = randn({3, 3, d}, 0.4, rng);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const int db = cfg.block_dim(b);
    const int dh = cfg.mlp_ratio * db;
    BlockWeights bw;
    const double ws = std::sqrt(2.0 / db);
    bw.w_q = randn({db, db}, ws, rng);
    bw.w_k = randn({db, db}, ws, rng);
    bw.w_v = randn({db, db}, ws, rng);
    bw.w_proj = randn({db, db}, ws, rng);
    bw.mlp_w1 = randn({db, dh}, ws, rng);
    bw.mlp_w2 = randn({dh, db}, std::sqrt(2.0 / dh), rng);
    bw.aff_q = unit_affine(db);
    bw.aff_k = unit_affine(db);
    bw.aff_v = unit_affine(db);
    bw.aff_m1 = unit_affine(dh);
    bw.aff_m2 = unit_affine(db);
    w.blocks.push_back(std::move(bw));
  }
  if (cfg.merge_stage) {
    w.merge_conv = randn({2, 2, d, 2 * d}, std::sqrt(2.0 / (4.0 * d)), rng);
    w.merge_aff = unit_affine(2 * d);
  }
  w.head_w = randn({cfg.final_dim(), cfg.classes}, 0.1, rng);
  w.head_b = Tensor::zeros({cfg.classes});
  return w;
}

void ModelWeights::for_each_param(const std::function<void(const std::string&, Tensor&)>& f) {
  f("embed.conv", embed_conv);
  f("embed.gain", embed_aff.gain);
  f("embed.shift", embed_aff.shift);
  f("embed.dw", embed_dw);
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockWeights& bw = blocks[b];
    f(p + "w_q", bw.w_q);
    f(p + "q.gain", bw.aff_q.gain);
    f(p + "q.shift", bw.aff_q.shift);
    f(p + "w_k", bw.w_k);
    f(p + "k.gain", bw.aff_k.gain);
    f(p + "k.shift", bw.aff_k.shift);
    f(p + "w_v", bw.w_v);
    f(p + "v.gain", bw.aff_v.gain);
    f(p + "v.shift", bw.aff_v.shift);
    f(p + "w_proj", bw.w_proj);
    f(p + "mlp_w1", bw.mlp_w1);
    f(p + "m1.gain", bw.aff_m1.gain);
    f(p + "m1.shift", bw.aff_m1.shift);
    f(p + "mlp_w2", bw.mlp_w2);
    f(p + "m2.gain", bw.aff_m2.gain);
    f(p + "m2.shift", bw.aff_m2.shift);
  }
  if (merge_conv.numel() > 0) {
    f("merge.conv", merge_conv);
    f("merge.gain", merge_aff.gain);
    f("merge.shift", merge_aff.shift);
  }
  f("head.w", head_w);
  f("head.b", head_b);
}

void ModelWeights::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& f) const {
  const_cast<ModelWeights*>(this)->for_each_param(
      [&](const std::string& n, Tensor& t) { f(n, t); });
}

namespace {

struct BlockMems {
  Var in, q, k, v, attn, res1, m1, m2, res2;
  std::vector<Var*> all() { return {&in, &q, &k, &v, &attn, &res1, &m1, &m2, &res2}; }
};

// Builds the whole T-step forward on one tape.
struct Runner {
  const ModelConfig& cfg;
  const ModelWeights& w;
  Tape& tape;
  const ForwardOptions& opt;

  std::unordered_map<std::string, Var> param_var;
  std::vector<std::string> param_names;
  std::vector<Var> param_list;

  Runner(const ModelConfig& c, const ModelWeights& mw, Tape& t, const ForwardOptions& o)
      : cfg(c), w(mw), tape(t), opt(o) {
    mw.for_each_param([&](const std::string& name, const Tensor& v) {
      Var pv = tape.leaf(v);
      param_var.emplace(name, pv);
      param_names.push_back(name);
      param_list.push_back(pv);
    });
  }

  Var P(const std::string& name) { return param_var.at(name); }

  void stat(const std::string& name, double macs, const Tensor& input, Billing bill) {
    if (!opt.stats) return;
    double s = 0;
    for (double v : input.data) s += v;
    opt.stats->add(name, macs, s, input.numel(), bill);
  }
  void stat_const_fr(const std::string& name, double macs, double elems, Billing bill) {
    if (!opt.stats) return;
    opt.stats->add(name, macs, elems, elems, bill);
  }

  std::pair<Var, Var> lif(Var mem, Var input, const std::string& ac_name) {
    const LifParams lp = cfg.neuron.lif();
    const SurrogateParams sg = cfg.neuron.sg();
    Var u = tape.add(mem, input);
    Var s = tape.spike(u, lp, sg, opt.mode);
    Var next;
    if (lp.reset_mode == ResetMode::hard) {
      next = tape.mul(u, tape.affine_scalar(s, -1.0, 1.0));
    } else {
      next = tape.sub(tape.scale(u, lp.tau), tape.scale(s, lp.theta));
    }
    stat_const_fr(ac_name + ".neuron", tape.val(u).numel(), tape.val(u).numel(), Billing::ac);
    return {s, next};
  }

  Var affine(Var x, const std::string& name) {
    return tape.affine_channels(x, P(name + ".gain"), P(name + ".shift"));
  }

  // SSA + residual + MLP + residual on a row sequence. Mutates the membrane
  // vars in `m` to the post-step values.
  Var block_core(int b, Var x, BlockMems& m) {
    const std::string pre = "block" + std::to_string(b) + ".";
    const int db = cfg.block_dim(b);
    const int dh = cfg.mlp_ratio * db;
    const int dhd = db / cfg.heads;
    const int rows = tape.val(x).rows();

    auto [s_in, m_in] = lif(m.in, x, pre);
    m.in = m_in;
    stat(pre + "qkv", 3.0 * flops_linear(rows, db, db), tape.val(s_in), Billing::ac);

    auto branch = [&](const char* wn, const char* an, Var mem) {
      Var pre_n = affine(tape.matmul(s_in, P(pre + wn)), pre + an);
      return lif(mem, pre_n, pre);
    };
    auto [q_s, mq] = branch("w_q", "q", m.q);
    auto [k_s, mk] = branch("w_k", "k", m.k);
    auto [v_s, mv] = branch("w_v", "v", m.v);
    m.q = mq;
    m.k = mk;
    m.v = mv;

    if (opt.stats) {
      double s3 = 0;
      for (Var qv : {q_s, k_s, v_s})
        for (double e : tape.val(qv).data) s3 += e;
      opt.stats->add(pre + "attn", double(flops_attention(cfg.heads, rows, dhd)), s3,
                     3.0 * rows * db, Billing::ac);
    }
    std::vector<Var> head_outs;
    for (int h = 0; h < cfg.heads; ++h) {
      const int c0 = h * dhd, c1 = (h + 1) * dhd;
      Var qh = tape.slice_cols(q_s, c0, c1);
      Var kh = tape.slice_cols(k_s, c0, c1);
      Var vh = tape.slice_cols(v_s, c0, c1);
      head_outs.push_back(tape.matmul(tape.matmul(qh, tape.transpose(kh)), vh));
    }
    Var attn = tape.scale(tape.concat_cols(head_outs), cfg.attn_scale);
    auto [s_attn, mattn] = lif(m.attn, attn, pre);
    m.attn = mattn;

    stat(pre + "proj", double(flops_linear(rows, db, db)), tape.val(s_attn), Billing::ac);
    Var ssa_out = tape.matmul(s_attn, P(pre + "w_proj"));

    Var res1 = tape.add(ssa_out, x);
    stat_const_fr(pre + "residual", 2.0 * rows * db, 2.0 * rows * db, Billing::ac);
    auto [x_hat, mr1] = lif(m.res1, res1, pre);
    m.res1 = mr1;

    stat(pre + "mlp.fc1", double(flops_linear(rows, db, dh)), tape.val(x_hat), Billing::ac);
    Var h1 = affine(tape.matmul(x_hat, P(pre + "mlp_w1")), pre + "m1");
    auto [s_m1, mm1] = lif(m.m1, h1, pre);
    m.m1 = mm1;

    stat(pre + "mlp.fc2", double(flops_linear(rows, dh, db)), tape.val(s_m1), Billing::ac);
    Var h2 = affine(tape.matmul(s_m1, P(pre + "mlp_w2")), pre + "m2");
    auto [s_m2, mm2] = lif(m.m2, h2, pre);
    m.m2 = mm2;

    Var res2 = tape.add(s_m2, x_hat);
    auto [out, mr2] = lif(m.res2, res2, pre);
    m.res2 = mr2;
    return out;
  }

  double scorer_macs(int h, int wd, int d) const {
    const int k = opt.scorer ? opt.scorer->window_k : 3;
    const double n = double(h) * wd;
    return n * d * k * k + 3.0 * n * d + n * d + 2.0 * n;
  }

  Var run(const Tensor& image) {
    const int gh = cfg.grid_h(), gw = cfg.grid_w();
    const int n0 = gh * gw, d0 = cfg.embed_dim;
    if (image.ndim() != 3 || image.dim(0) != cfg.input_h || image.dim(1) != cfg.input_w ||
        image.dim(2) != cfg.input_c) {
      throw std::invalid_argument("forward: image shape " + shape_str(image.shape) +
                                  " does not match config");
    }
    if (opt.schedule) {
      if (static_cast<int>(opt.schedule->ratios.size()) != cfg.num_blocks)
        throw std::invalid_argument("forward: schedule length does not match num_blocks");
      if (!opt.scorer) throw std::invalid_argument("forward: schedule given without scorer");
    }

    Var img = tape.leaf(image);
    Var mem_ec = tape.leaf(Tensor::zeros({gh, gw, d0}));
    Var mem_pe = tape.leaf(Tensor::zeros({gh, gw, d0}));
    Var mem_e0 = tape.leaf(Tensor::zeros({gh, gw, d0}));
    Var mem_merge;
    if (cfg.merge_stage)
      mem_merge = tape.leaf(Tensor::zeros({gh / 2, gw / 2, 2 * d0}));

    std::vector<BlockMems> mems(static_cast<size_t>(cfg.num_blocks));
    for (int b = 0; b < cfg.num_blocks; ++b) {
      const int nb = cfg.block_tokens(b), db = cfg.block_dim(b);
      BlockMems& m = mems[static_cast<size_t>(b)];
      for (Var* mv : m.all()) *mv = tape.leaf(Tensor::zeros({nb, db}));
      m.m1 = tape.leaf(Tensor::zeros({nb, cfg.mlp_ratio * db}));
    }

    // Previous-step block inputs for the temporal scorer.
    std::vector<Tensor> prev_input(static_cast<size_t>(cfg.num_blocks));

    Var acc = tape.leaf(Tensor::zeros({1, cfg.classes}));
    if (opt.stats) opt.stats->time_steps = cfg.time_steps;

    for (int t = 1; t <= cfg.time_steps; ++t) {
      // Spiking patch embedding + depthwise positional residual.
      stat_const_fr("embed.conv", double(flops_conv(gh, gw, d0, cfg.input_c, cfg.patch)),
                    double(image.numel()), Billing::mac);
      Var c = tape.conv_patch(img, P("embed.conv"), cfg.patch);
      c = affine(c, "embed");
      auto [s_e, me] = lif(mem_ec, c, "embed");
      mem_ec = me;
      stat("embed.dw", double(gh) * gw * d0 * 9.0, tape.val(s_e), Billing::ac);
      Var pe_in = tape.dwconv3(s_e, P("embed.dw"));
      auto [s_pe, mpe] = lif(mem_pe, pe_in, "embed");
      mem_pe = mpe;
      Var sum0 = tape.add(s_e, s_pe);
      stat_const_fr("embed.residual", double(gh) * gw * d0, double(gh) * gw * d0, Billing::ac);
      auto [x0, m0] = lif(mem_e0, sum0, "embed");
      mem_e0 = m0;
      Var x = tape.reshape(x0, {n0, d0});

      for (int b = 0; b < cfg.num_blocks; ++b) {
        if (cfg.merge_stage && b == cfg.merge_before()) {
          const int h = cfg.block_grid_h(b - 1), wd = cfg.block_grid_w(b - 1);
          Var xg = tape.reshape(x, {h, wd, d0});
          stat("merge.conv", double(flops_conv(h / 2, wd / 2, 2 * d0, d0, 2)), tape.val(xg),
               Billing::ac);
          Var mc = tape.conv_patch(xg, P("merge.conv"), 2);
          mc = affine(mc, "merge");
          auto [ms, mm] = lif(mem_merge, mc, "merge");
          mem_merge = mm;
          x = tape.reshape(ms, {h / 2 * (wd / 2), 2 * d0});
        }
        const int h = cfg.block_grid_h(b), wd = cfg.block_grid_w(b);
        const int db = cfg.block_dim(b);
        BlockMems& m = mems[static_cast<size_t>(b)];

        if (!opt.schedule) {
          x = block_core(b, x, m);
          continue;
        }

        // IR-Arc: score on the block's input spikes, keep TopK, bypass the rest.
        Tensor xin = tape.val(x);
        Tensor grid = xin;
        grid.shape = {h, wd, db};
        const Tensor* prev =
            (t > 1 && prev_input[static_cast<size_t>(b)].numel() > 0)
                ? &prev_input[static_cast<size_t>(b)]
                : nullptr;
        ScoreMap scores = irtop(grid, prev, t, *opt.scorer);
        TokenPartition part = partition(scores, opt.schedule->ratios[static_cast<size_t>(b)]);
        prev_input[static_cast<size_t>(b)] = grid;
        stat_const_fr("scorer", scorer_macs(h, wd, db), scorer_macs(h, wd, db), Billing::mac);

        PruneTraceEntry entry;
        if (opt.trace) {
          entry.block = b;
          entry.t = t;
          entry.scores = scores;
          entry.part = part;
          entry.input = xin;
          for (Var* mv : m.all()) entry.mem_before.push_back(tape.val(*mv));
        }

        Var xr = tape.gather_rows(x, part.informative);
        BlockMems gm;
        {
          auto full = m.all();
          auto rowsv = gm.all();
          for (size_t i = 0; i < full.size(); ++i)
            *rowsv[i] = tape.gather_rows(*full[i], part.informative);
        }
        Var outr = block_core(b, xr, gm);
        Var out = tape.scatter_rows(x, outr, part.informative);
        {
          auto full = m.all();
          auto rowsv = gm.all();
          for (size_t i = 0; i < full.size(); ++i)
            *full[i] = tape.scatter_rows(*full[i], *rowsv[i], part.informative);
        }
        if (opt.trace) {
          entry.output = tape.val(out);
          for (Var* mv : m.all()) entry.mem_after.push_back(tape.val(*mv));
          opt.trace->entries.push_back(std::move(entry));
        }
        x = out;
      }

      stat("head", double(flops_linear(1, cfg.final_dim(), cfg.classes)), tape.val(x),
           Billing::ac);
      Var gap = tape.mean_rows(x);
      Var logit_t = tape.linear_bias(gap, P("head.w"), P("head.b"));
      acc = tape.add(acc, logit_t);
    }
    if (opt.stats) opt.stats->samples += 1;
    return tape.reshape(tape.scale(acc, 1.0 / cfg.time_steps), {cfg.classes});
  }
};

}  // namespace

Tensor model_forward(const ModelConfig& cfg, const ModelWeights& w, const Tensor& image,
                     const ForwardOptions& opt) {
  cfg.validate();
  Tape tape;
  Runner r(cfg, w, tape, opt);
  Var out = r.run(image);
  Tensor logits = tape.val(out);
  check_finite(logits, "model_forward logits");
  return logits;
}

Tensor model_forward_pruned(const ModelConfig& cfg, const ModelWeights& w, const Tensor& image,
                            const ScorerConfig& scorer, const PruneSchedule& schedule,
                            const ForwardOptions& opt) {
  ForwardOptions o = opt;
  o.scorer = &scorer;
  o.schedule = &schedule;
  return model_forward(cfg, w, image, o);
}

RecordedForward forward_recorded(const ModelConfig& cfg, const ModelWeights& w,
                                 const Tensor& image, const ForwardOptions& opt) {
  cfg.validate();
  RecordedForward fwd;
  fwd.tape = std::make_unique<Tape>();
  fwd.tape->recording = true;
  Runner r(cfg, w, *fwd.tape, opt);
  fwd.logits = r.run(image);
  fwd.param_names = std::move(r.param_names);
  fwd.params = std::move(r.param_list);
  return fwd;
}

std::vector<Tensor> grads_from_logits(RecordedForward& fwd, const Tensor& dlogits) {
  fwd.tape->backward(fwd.logits, dlogits);
  std::vector<Tensor> grads;
  grads.reserve(fwd.params.size());
  for (Var p : fwd.params) grads.push_back(fwd.tape->grad(p));
  return grads;
}

}  // namespace sp
