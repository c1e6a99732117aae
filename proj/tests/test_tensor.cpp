#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spikeprune/tensor.hpp"

using namespace sp;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Independent scalar triple-loop oracle.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < b.dim(1); ++j) {
      double acc = 0;
      for (int k = 0; k < a.dim(1); ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

// Scalar-loop window mean over explicit in-bounds window sets.
Tensor window_mean_oracle(const Tensor& x, int k) {
  const int h = x.dim(0), w = x.dim(1), d = x.dim(2), r = (k - 1) / 2;
  Tensor out({h, w, d});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < d; ++c) {
        double sum = 0;
        int count = 0;
        for (int p = i - r; p <= i + r; ++p)
          for (int q = j - r; q <= j + r; ++q) {
            if (p < 0 || p >= h || q < 0 || q >= w) continue;
            sum += x.at(p, q, c);
            ++count;
          }
        out.at(i, j, c) = sum / count;
      }
  return out;
}

}  // namespace

TEST_CASE("matmul identity and annihilator") {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Rng rng(11);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor p = matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(p.at(i) == a.at(i));

  Tensor m({2, 2});
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(1, 0) = 3;
  m.at(1, 1) = 4;
  Tensor z = matmul(m, Tensor::zeros({2, 2}));
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("matmul matches scalar-loop oracle") {
  Rng rng(5);
  {
    Tensor a = random_tensor({5, 7}, rng);
    Tensor b = random_tensor({7, 3}, rng);
    Tensor c = matmul(a, b), o = matmul_oracle(a, b);
    for (int i = 0; i < c.numel(); ++i) CHECK(c.at(i) == doctest::Approx(o.at(i)).epsilon(1e-12));
  }
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({8, 8}, rng);
    Tensor b = random_tensor({8, 8}, rng);
    Tensor c = matmul(a, b), o = matmul_oracle(a, b);
    for (int i = 0; i < c.numel(); ++i) {
      const double denom = std::max(1.0, std::abs(o.at(i)));
      CHECK(std::abs(c.at(i) - o.at(i)) / denom <= 1e-12);
    }
  }
}

TEST_CASE("matmul shape mismatch throws") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST_CASE("window_mean constants and k=1") {
  Tensor c = Tensor::full({4, 5, 3}, 2.5);
  for (int k : {1, 3, 5}) {
    Tensor o = window_mean(c, k);
    for (double v : o.data) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
  }
  Rng rng(3);
  Tensor x = random_tensor({4, 4, 2}, rng);
  Tensor o = window_mean(x, 1);
  for (int i = 0; i < x.numel(); ++i) CHECK(o.at(i) == x.at(i));
}

TEST_CASE("window_mean single impulse, edge divisors") {
  Tensor x = Tensor::zeros({3, 3, 1});
  x.at(1, 1, 0) = 1.0;
  Tensor o = window_mean(x, 3);
  // Every window contains the center; divisor is the in-bounds count.
  CHECK(o.at(0, 0, 0) == doctest::Approx(1.0 / 4));
  CHECK(o.at(0, 1, 0) == doctest::Approx(1.0 / 6));
  CHECK(o.at(1, 1, 0) == doctest::Approx(1.0 / 9));
  Tensor oracle = window_mean_oracle(x, 3);
  for (int i = 0; i < o.numel(); ++i) CHECK(o.at(i) == doctest::Approx(oracle.at(i)));
}

TEST_CASE("window_mean matches oracle on random maps") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({5, 6, 4}, rng, 0.0, 1.0);
    for (int k : {1, 3, 5}) {
      Tensor o = window_mean(x, k), e = window_mean_oracle(x, k);
      for (int i = 0; i < o.numel(); ++i) CHECK(o.at(i) == doctest::Approx(e.at(i)).epsilon(1e-13));
    }
  }
}

TEST_CASE("window_mean rejects even k") {
  CHECK_THROWS_AS(window_mean(Tensor::zeros({2, 2, 1}), 2), std::invalid_argument);
}

TEST_CASE("cosine_similarity basics") {
  std::vector<double> a = {1, 2, 3}, b = {1, 2, 3};
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-7));
  std::vector<double> u = {1, 0}, v = {0, 1};
  CHECK(cosine_similarity(u, v) == doctest::Approx(0.0));
  std::vector<double> z = {0, 0}, w = {3, 4};
  CHECK(cosine_similarity(z, w) == 0.0);
}

TEST_CASE("cosine_similarity symmetry and positive scale invariance") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[i] = rng.uniform(-1, 1);
      b[i] = rng.uniform(-1, 1);
    }
    // keep norms away from the eps regime
    a[0] += 2.0;
    b[1] += 2.0;
    const double ab = cosine_similarity(a, b);
    CHECK(cosine_similarity(b, a) == ab);
    std::vector<double> a3 = a;
    for (double& v : a3) v *= 3.7;
    // exact invariance is broken only by the eps term in the denominator
    CHECK(std::abs(cosine_similarity(a3, b) - ab) <= 1e-7);
  }
}

TEST_CASE("rng determinism") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("check_finite rejects NaN") {
  Tensor t = Tensor::zeros({2});
  t.at(0) = std::nan("");
  CHECK_THROWS(check_finite(t, "test"));
}
