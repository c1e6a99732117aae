#include "spikeprune/neuron.hpp"

#include <cmath>
#include <stdexcept>

namespace sp {

Tensor lif_step(NeuronState& state, const Tensor& input, const LifParams& params) {
  if (!state.membrane.same_shape(input)) {
    throw std::invalid_argument("lif_step: input shape " + shape_str(input.shape) +
                                " does not match membrane " + shape_str(state.membrane.shape));
  }
  Tensor spikes(input.shape);
  for (int i = 0; i < input.numel(); ++i) {
    const double u_tilde = state.membrane.at(i) + input.at(i);
    const double s = (u_tilde >= params.theta) ? 1.0 : 0.0;  // ties fire
    spikes.at(i) = s;
    if (params.reset_mode == ResetMode::hard) {
      state.membrane.at(i) = u_tilde * (1.0 - s);
    } else {
      state.membrane.at(i) = params.tau * u_tilde - params.theta * s;
    }
  }
  state.step_index += 1;
  check_finite(state.membrane, "lif_step membrane");
  return spikes;
}

double surrogate_grad(double u_tilde, const LifParams& params, const SurrogateParams& sg) {
  return std::max(0.0, sg.beta - std::abs(u_tilde - params.theta));
}

double relaxed_spike(double u_tilde, const LifParams& params, const SurrogateParams& sg) {
  const double b = sg.beta;
  const double x = u_tilde - params.theta;
  if (x <= -b) return 0.0;
  if (x >= b) return b * b;
  if (x <= 0.0) {
    const double y = x + b;
    return 0.5 * y * y;
  }
  const double y = b - x;
  return b * b - 0.5 * y * y;
}

void reset_state(NeuronState& state) {
  std::fill(state.membrane.data.begin(), state.membrane.data.end(), 0.0);
  state.step_index = 0;
}

}  // namespace sp
