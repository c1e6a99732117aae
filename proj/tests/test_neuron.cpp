#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spikeprune/neuron.hpp"

using namespace sp;

namespace {
Tensor scalar(double v) { return Tensor::full({1}, v); }
}  // namespace

TEST_CASE("hard reset spike") {
  NeuronState st({1});
  LifParams p{0.5, 1.0, ResetMode::hard};
  Tensor s = lif_step(st, scalar(1.5), p);
  CHECK(s.at(0) == 1.0);
  CHECK(st.membrane.at(0) == 0.0);
  CHECK(st.step_index == 1);
}

TEST_CASE("soft reset spike") {
  NeuronState st({1});
  LifParams p{0.5, 1.0, ResetMode::soft};
  Tensor s = lif_step(st, scalar(1.5), p);
  CHECK(s.at(0) == 1.0);
  CHECK(st.membrane.at(0) == doctest::Approx(-0.25));
}

TEST_CASE("sub-threshold accumulation") {
  LifParams hard{0.5, 1.0, ResetMode::hard};
  NeuronState st({1});
  st.membrane.at(0) = 0.4;
  Tensor s = lif_step(st, scalar(0.3), hard);
  CHECK(s.at(0) == 0.0);
  CHECK(st.membrane.at(0) == doctest::Approx(0.7));

  LifParams soft{0.5, 1.0, ResetMode::soft};
  NeuronState st2({1});
  st2.membrane.at(0) = 0.4;
  Tensor s2 = lif_step(st2, scalar(0.3), soft);
  CHECK(s2.at(0) == 0.0);
  CHECK(st2.membrane.at(0) == doctest::Approx(0.5 * 0.7));
}

TEST_CASE("threshold tie fires") {
  NeuronState st({1});
  LifParams p{0.5, 1.0, ResetMode::hard};
  Tensor s = lif_step(st, scalar(1.0), p);
  CHECK(s.at(0) == 1.0);
  CHECK(st.membrane.at(0) == 0.0);
}

TEST_CASE("spikes are binary, hard reset zeroes fired positions") {
  Rng rng(9);
  NeuronState st({4, 8});
  LifParams p{0.5, 1.0, ResetMode::hard};
  for (int step = 0; step < 5; ++step) {
    Tensor input({4, 8});
    for (double& v : input.data) v = rng.uniform(-1.0, 2.0);
    Tensor s = lif_step(st, input, p);
    for (int i = 0; i < s.numel(); ++i) {
      CHECK((s.at(i) == 0.0 || s.at(i) == 1.0));
      if (s.at(i) == 1.0) CHECK(st.membrane.at(i) == 0.0);
    }
  }
}

TEST_CASE("lif_step shape mismatch throws") {
  NeuronState st({2, 2});
  LifParams p;
  CHECK_THROWS_AS(lif_step(st, Tensor::zeros({3, 2}), p), std::invalid_argument);
}

TEST_CASE("triangular surrogate values") {
  LifParams p{0.5, 1.0, ResetMode::soft};
  SurrogateParams sg{1.0};
  CHECK(surrogate_grad(1.0, p, sg) == 1.0);          // peak at theta
  CHECK(surrogate_grad(2.0, p, sg) == 0.0);          // theta + beta
  CHECK(surrogate_grad(0.0, p, sg) == 0.0);          // theta - beta
  CHECK(surrogate_grad(1.5, p, sg) == doctest::Approx(0.5));  // linear flank
  SurrogateParams sg2{0.4};
  CHECK(surrogate_grad(1.2, p, sg2) == doctest::Approx(0.2));
}

TEST_CASE("surrogate symmetric, nonnegative, compact support") {
  LifParams p{0.5, 1.3, ResetMode::soft};
  SurrogateParams sg{0.7};
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.uniform(-2.0, 2.0);
    const double g = surrogate_grad(p.theta + d, p, sg);
    CHECK(g >= 0.0);
    CHECK(g == surrogate_grad(p.theta - d, p, sg));
    if (std::abs(d) > sg.beta) CHECK(g == 0.0);
  }
}

TEST_CASE("relaxed spike is the surrogate's antiderivative") {
  LifParams p{0.5, 1.0, ResetMode::soft};
  SurrogateParams sg{1.0};
  CHECK(relaxed_spike(-1.0, p, sg) == 0.0);
  CHECK(relaxed_spike(3.0, p, sg) == 1.0);  // beta^2
  CHECK(relaxed_spike(1.0, p, sg) == doctest::Approx(0.5));
  // derivative by central differences equals the triangle away from kinks
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double u = rng.uniform(-0.8, 2.8);
    if (std::abs(u - 0.0) < 1e-2 || std::abs(u - 1.0) < 1e-2 || std::abs(u - 2.0) < 1e-2)
      continue;
    const double h = 1e-6;
    const double fd = (relaxed_spike(u + h, p, sg) - relaxed_spike(u - h, p, sg)) / (2 * h);
    CHECK(fd == doctest::Approx(surrogate_grad(u, p, sg)).epsilon(1e-6));
  }
}

TEST_CASE("reset_state zeroes and is idempotent") {
  NeuronState st({3, 3});
  LifParams p;
  lif_step(st, Tensor::full({3, 3}, 0.6), p);
  reset_state(st);
  for (double v : st.membrane.data) CHECK(v == 0.0);
  CHECK(st.step_index == 0);
  reset_state(st);
  for (double v : st.membrane.data) CHECK(v == 0.0);
  Tensor s = lif_step(st, Tensor::zeros({3, 3}), p);
  for (double v : s.data) CHECK(v == 0.0);
}
