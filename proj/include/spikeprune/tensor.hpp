#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sp {

using Shape = std::vector<int>;

// Dense row-major tensor of doubles, up to 4 axes.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v);

  int numel() const { return static_cast<int>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
  double& at(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  double at(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  // Contiguous row of a 2-D tensor, or the channel vector at (h,w) of a 3-D one.
  std::span<double> row(int i) {
    int w = numel() / shape[0];
    if (ndim() == 3) w = shape[2];
    return {data.data() + static_cast<size_t>(i) * row_stride(), static_cast<size_t>(row_width())};
  }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<size_t>(i) * row_stride(), static_cast<size_t>(row_width())};
  }
  int row_width() const { return ndim() <= 1 ? numel() : shape.back(); }
  int row_stride() const { return row_width(); }
  int rows() const { return row_width() == 0 ? 0 : numel() / row_width(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

int shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Throws std::runtime_error naming `where` if any element is NaN/Inf.
void check_finite(const Tensor& t, const char* where);

// c[i,j] = sum_k a[i,k] b[k,j], 64-bit accumulation. Throws on shape mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// Per-channel mean over the in-bounds k x k window centered at each position.
// x is [H x W x D]; divisor is the in-bounds neighbor count (center included).
// k must be odd and >= 1.
Tensor window_mean(const Tensor& x, int k);

// <a,b> / (|a| |b| + eps), clamped to [-1, 1]. Zero vectors yield 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b,
                         double eps = 1e-8);

// Deterministic 64-bit generator (splitmix64 core). Same seed, same sequence,
// independent of platform stdlib.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double a, double b);
  double normal();                       // standard normal, Box-Muller
  double normal(double mu, double sigma) { return mu + sigma * normal(); }
  int uniform_int(int n);                // [0, n)

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sp
