#pragma once

#include <functional>
#include <vector>

#include "spikeprune/neuron.hpp"
#include "spikeprune/tensor.hpp"

namespace sp {

// binary: Heaviside forward, triangular surrogate backward (STBP).
// relaxed: smooth ramp forward whose exact derivative is the surrogate;
//          lets finite differences validate the backward pass.
enum class SpikeMode { binary, relaxed };

struct Var {
  int id = -1;
};

// Reverse-mode tape. Ops always compute values; backward closures are only
// recorded when `recording` is set, so inference reuses the same forward code.
// One tape per sample forward; not thread-shared.
class Tape {
 public:
  bool recording = false;

  const Tensor& val(Var v) const { return values_[static_cast<size_t>(v.id)]; }
  const Tensor& grad(Var v) const { return grads_[static_cast<size_t>(v.id)]; }

  Var leaf(Tensor v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                          // elementwise
  Var scale(Var a, double c);
  Var affine_scalar(Var a, double mul, double add);  // mul*x + add, elementwise
  Var matmul(Var a, Var b);
  Var transpose(Var a);                           // 2-D
  Var affine_channels(Var x, Var gain, Var shift);   // rows x C, per-channel
  Var linear_bias(Var x, Var w, Var b);              // x[N,K]*w[K,M] + b[M]
  Var conv_patch(Var x, Var w, int stride);          // [H,W,Ci], w [P,P,Ci,Co]
  Var dwconv3(Var x, Var w);                         // [H,W,C], w [3,3,C], same pad
  Var spike(Var u_tilde, const LifParams& lif, const SurrogateParams& sg, SpikeMode mode);
  Var gather_rows(Var x, std::vector<int> idx);
  Var scatter_rows(Var base, Var rows, std::vector<int> idx);
  Var mean_rows(Var x);                           // [N,D] -> [1,D]
  Var slice_cols(Var x, int c0, int c1);
  Var concat_cols(const std::vector<Var>& parts);
  Var reshape(Var x, Shape s);

  // Seeds d(out)=seed and runs all recorded closures in reverse.
  void backward(Var out, const Tensor& seed);

 private:
  int push(Tensor v, std::function<void()> back = nullptr);
  Tensor& g(int id) { return grads_[static_cast<size_t>(id)]; }
  const Tensor& v(int id) const { return values_[static_cast<size_t>(id)]; }

  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<std::function<void()>> backs_;
};

}  // namespace sp
