#include "spikeprune/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sp {

int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  if (shape.size() > 4) throw std::invalid_argument("tensor: more than 4 axes");
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive extent in " + shape_str(shape));
  }
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::full(Shape s, double v) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

void check_finite(const Tensor& t, const char* where) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value in ") + where);
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data.data() + static_cast<size_t>(i) * k;
    double* crow = c.data.data() + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;  // spike inputs are mostly zero
      const double* brow = b.data.data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor window_mean(const Tensor& x, int k) {
  if (x.ndim() != 3) throw std::invalid_argument("window_mean: expected [HxWxD]");
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("window_mean: k must be odd and >= 1");
  const int h = x.dim(0), w = x.dim(1), d = x.dim(2);
  const int r = (k - 1) / 2;
  Tensor out({h, w, d});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int i0 = std::max(0, i - r), i1 = std::min(h - 1, i + r);
      const int j0 = std::max(0, j - r), j1 = std::min(w - 1, j + r);
      const double inv = 1.0 / ((i1 - i0 + 1) * (j1 - j0 + 1));
      double* o = &out.at(i, j, 0);
      for (int p = i0; p <= i1; ++p) {
        for (int q = j0; q <= j1; ++q) {
          const double* src = x.data.data() + (static_cast<size_t>(p) * w + q) * d;
          for (int c = 0; c < d; ++c) o[c] += src[c];
        }
      }
      for (int c = 0; c < d; ++c) o[c] *= inv;
    }
  }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b, double eps) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double c = dot / (std::sqrt(na) * std::sqrt(nb) + eps);
  return std::clamp(c, -1.0, 1.0);
}

uint64_t Rng::next_u64() {
  // splitmix64
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

int Rng::uniform_int(int n) {
  return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

}  // namespace sp
