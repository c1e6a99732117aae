#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "spikeprune/tape.hpp"

using namespace sp;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

double sum_all(const Tensor& t) {
  double s = 0;
  for (double v : t.data) s += v;
  return s;
}

// Compares the tape gradient of sum(build(leaves)) against central finite
// differences on every element of every leaf.
void fd_check(std::vector<Tensor> leaves,
              const std::function<Var(Tape&, const std::vector<Var>&)>& build,
              double tol = 1e-7) {
  Tape tape;
  tape.recording = true;
  std::vector<Var> vars;
  for (const Tensor& t : leaves) vars.push_back(tape.leaf(t));
  Var out = build(tape, vars);
  tape.backward(out, Tensor::full(tape.val(out).shape, 1.0));

  const double h = 1e-6;
  for (size_t li = 0; li < leaves.size(); ++li) {
    for (int i = 0; i < leaves[li].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Tensor> mod = leaves;
        mod[li].at(i) += delta;
        Tape t2;
        std::vector<Var> v2;
        for (const Tensor& t : mod) v2.push_back(t2.leaf(t));
        return sum_all(t2.val(build(t2, v2)));
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      const double an = tape.grad(vars[li]).at(i);
      CHECK(std::abs(fd - an) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("elementwise ops gradients") {
  Rng rng(1);
  fd_check({random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); });
  fd_check({random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.sub(v[0], v[1]); });
  fd_check({random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.mul(v[0], v[1]); });
  fd_check({random_tensor({2, 5}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.affine_scalar(v[0], -1.7, 0.3); });
}

TEST_CASE("matmul, transpose, linear_bias gradients") {
  Rng rng(2);
  fd_check({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
  fd_check({random_tensor({3, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.transpose(v[0]); });
  fd_check({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.linear_bias(v[0], v[1], v[2]); });
}

TEST_CASE("affine_channels gradient") {
  Rng rng(3);
  fd_check({random_tensor({4, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.affine_channels(v[0], v[1], v[2]);
           });
}

TEST_CASE("conv gradients") {
  Rng rng(4);
  fd_check({random_tensor({4, 4, 2}, rng), random_tensor({2, 2, 2, 3}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.conv_patch(v[0], v[1], 2); });
  fd_check({random_tensor({4, 5, 3}, rng), random_tensor({3, 3, 3}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.dwconv3(v[0], v[1]); });
}

TEST_CASE("gather, scatter, mean, slice, concat, reshape gradients") {
  Rng rng(5);
  fd_check({random_tensor({5, 3}, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.gather_rows(v[0], {4, 0, 2});
  });
  fd_check({random_tensor({5, 3}, rng), random_tensor({2, 3}, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.scatter_rows(v[0], v[1], {1, 3});
           });
  fd_check({random_tensor({6, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.mean_rows(v[0]); });
  fd_check({random_tensor({4, 6}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.slice_cols(v[0], 1, 4); });
  fd_check({random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.concat_cols({v[0], v[1]});
           });
  fd_check({random_tensor({2, 6}, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.reshape(v[0], {3, 4}); });
}

TEST_CASE("relaxed spike node matches finite differences away from kinks") {
  LifParams lif{0.5, 1.0, ResetMode::soft};
  SurrogateParams sg{1.0};
  Rng rng(6);
  Tensor u({4, 4});
  for (double& v : u.data) {
    double x;
    do {
      x = rng.uniform(-0.5, 2.5);
    } while (std::abs(x) < 5e-3 || std::abs(x - 1.0) < 5e-3 || std::abs(x - 2.0) < 5e-3);
    v = x;
  }
  fd_check({u}, [&](Tape& t, const std::vector<Var>& v) {
    return t.spike(v[0], lif, sg, SpikeMode::relaxed);
  });
}

TEST_CASE("binary spike node uses the surrogate backward") {
  LifParams lif{0.5, 1.0, ResetMode::soft};
  SurrogateParams sg{1.0};
  Tape tape;
  tape.recording = true;
  Tensor u({3});
  u.at(0) = 1.0;   // at threshold: fires, surrogate peak
  u.at(1) = 0.2;   // silent, surrogate 0.2
  u.at(2) = -2.0;  // silent, outside the window
  Var uv = tape.leaf(u);
  Var s = tape.spike(uv, lif, sg, SpikeMode::binary);
  CHECK(tape.val(s).at(0) == 1.0);
  CHECK(tape.val(s).at(1) == 0.0);
  tape.backward(s, Tensor::full({3}, 1.0));
  CHECK(tape.grad(uv).at(0) == doctest::Approx(1.0));
  CHECK(tape.grad(uv).at(1) == doctest::Approx(0.2));
  CHECK(tape.grad(uv).at(2) == 0.0);
}

TEST_CASE("scatter keeps bypassed rows bit-for-bit") {
  Rng rng(7);
  Tape tape;
  Tensor base = random_tensor({5, 3}, rng);
  Tensor rows = random_tensor({2, 3}, rng);
  Var b = tape.leaf(base);
  Var r = tape.leaf(rows);
  Var out = tape.scatter_rows(b, r, {0, 3});
  for (int j = 0; j < 3; ++j) {
    CHECK(tape.val(out).at(1, j) == base.at(1, j));
    CHECK(tape.val(out).at(2, j) == base.at(2, j));
    CHECK(tape.val(out).at(4, j) == base.at(4, j));
    CHECK(tape.val(out).at(0, j) == rows.at(0, j));
    CHECK(tape.val(out).at(3, j) == rows.at(1, j));
  }
}
