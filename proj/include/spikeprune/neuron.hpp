#pragma once

#include "spikeprune/tensor.hpp"

namespace sp {

enum class ResetMode { hard, soft };

struct LifParams {
  double tau = 0.5;      // leak factor, (0, 1]; only used by soft reset
  double theta = 1.0;    // firing threshold, > 0
  ResetMode reset_mode = ResetMode::soft;
};

struct SurrogateParams {
  double beta = 1.0;  // half-width of the triangular gradient window
};

// Per-layer membrane potentials, one row per token.
struct NeuronState {
  Tensor membrane;
  int step_index = 0;

  explicit NeuronState(Shape s) : membrane(Tensor::zeros(std::move(s))) {}
};

// One integrate/fire/reset step. Mutates `state` in place (membrane and
// step_index advance) and returns the binary spike tensor.
//   u~ = u + input;  s = 1 where u~ >= theta
//   hard: u' = u~ (1 - s);  soft: u' = tau u~ - theta s
Tensor lif_step(NeuronState& state, const Tensor& input, const LifParams& params);

// Triangular surrogate derivative: max(0, beta - |u~ - theta|).
double surrogate_grad(double u_tilde, const LifParams& params, const SurrogateParams& sg);

// Smooth ramp whose exact derivative is surrogate_grad: 0 below theta-beta,
// beta^2 above theta+beta, piecewise quadratic between. Used by the relaxed
// forward mode for finite-difference checks.
double relaxed_spike(double u_tilde, const LifParams& params, const SurrogateParams& sg);

// Zero the membrane and rewind step_index.
void reset_state(NeuronState& state);

}  // namespace sp
