#include "spikeprune/tape.hpp"

#include <stdexcept>
#include <utility>

namespace sp {

namespace {
void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

int Tape::push(Tensor v, std::function<void()> back) {
  values_.push_back(std::move(v));
  if (recording) backs_.push_back(std::move(back));
  return static_cast<int>(values_.size()) - 1;
}

Var Tape::leaf(Tensor v) { return {push(std::move(v))}; }

Var Tape::add(Var a, Var b) {
  require(v(a.id).same_shape(v(b.id)), "tape add: shape mismatch");
  Tensor out = v(a.id);
  for (int i = 0; i < out.numel(); ++i) out.at(i) += v(b.id).at(i);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, b, id] {
      for (int i = 0; i < g(id).numel(); ++i) {
        g(a.id).at(i) += g(id).at(i);
        g(b.id).at(i) += g(id).at(i);
      }
    };
  }
  return {id};
}

Var Tape::sub(Var a, Var b) {
  require(v(a.id).same_shape(v(b.id)), "tape sub: shape mismatch");
  Tensor out = v(a.id);
  for (int i = 0; i < out.numel(); ++i) out.at(i) -= v(b.id).at(i);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, b, id] {
      for (int i = 0; i < g(id).numel(); ++i) {
        g(a.id).at(i) += g(id).at(i);
        g(b.id).at(i) -= g(id).at(i);
      }
    };
  }
  return {id};
}

Var Tape::mul(Var a, Var b) {
  require(v(a.id).same_shape(v(b.id)), "tape mul: shape mismatch");
  Tensor out = v(a.id);
  for (int i = 0; i < out.numel(); ++i) out.at(i) *= v(b.id).at(i);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, b, id] {
      for (int i = 0; i < g(id).numel(); ++i) {
        g(a.id).at(i) += g(id).at(i) * v(b.id).at(i);
        g(b.id).at(i) += g(id).at(i) * v(a.id).at(i);
      }
    };
  }
  return {id};
}

Var Tape::scale(Var a, double c) { return affine_scalar(a, c, 0.0); }

Var Tape::affine_scalar(Var a, double mul, double addv) {
  Tensor out = v(a.id);
  for (int i = 0; i < out.numel(); ++i) out.at(i) = mul * out.at(i) + addv;
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, id, mul] {
      for (int i = 0; i < g(id).numel(); ++i) g(a.id).at(i) += mul * g(id).at(i);
    };
  }
  return {id};
}

Var Tape::matmul(Var a, Var b) {
  Tensor out = sp::matmul(v(a.id), v(b.id));
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, b, id] {
      const Tensor& A = v(a.id);
      const Tensor& B = v(b.id);
      const Tensor& G = g(id);
      const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
      Tensor& GA = g(a.id);
      Tensor& GB = g(b.id);
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += G.at(i, j) * B.at(p, j);
          GA.at(i, p) += acc;
        }
      }
      for (int p = 0; p < k; ++p) {
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += A.at(i, p) * G.at(i, j);
          GB.at(p, j) += acc;
        }
      }
    };
  }
  return {id};
}

Var Tape::transpose(Var a) {
  const Tensor& A = v(a.id);
  require(A.ndim() == 2, "tape transpose: expected 2-D");
  Tensor out({A.dim(1), A.dim(0)});
  for (int i = 0; i < A.dim(0); ++i)
    for (int j = 0; j < A.dim(1); ++j) out.at(j, i) = A.at(i, j);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, a, id] {
      const Tensor& G = g(id);
      for (int i = 0; i < G.dim(0); ++i)
        for (int j = 0; j < G.dim(1); ++j) g(a.id).at(j, i) += G.at(i, j);
    };
  }
  return {id};
}

Var Tape::affine_channels(Var x, Var gain, Var shift) {
  const Tensor& X = v(x.id);
  const int c = X.row_width();
  require(v(gain.id).numel() == c && v(shift.id).numel() == c,
          "tape affine_channels: channel count mismatch");
  Tensor out = X;
  const int n = X.rows();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      out.data[static_cast<size_t>(i) * c + j] =
          v(gain.id).at(j) * X.data[static_cast<size_t>(i) * c + j] + v(shift.id).at(j);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, gain, shift, id, n, c] {
      const Tensor& X2 = v(x.id);
      const Tensor& G = g(id);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
          const double gv = G.data[static_cast<size_t>(i) * c + j];
          g(x.id).data[static_cast<size_t>(i) * c + j] += gv * v(gain.id).at(j);
          g(gain.id).at(j) += gv * X2.data[static_cast<size_t>(i) * c + j];
          g(shift.id).at(j) += gv;
        }
      }
    };
  }
  return {id};
}

Var Tape::linear_bias(Var x, Var w, Var b) {
  Tensor out = sp::matmul(v(x.id), v(w.id));
  const int m = out.dim(0), n = out.dim(1);
  require(v(b.id).numel() == n, "tape linear_bias: bias length mismatch");
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += v(b.id).at(j);
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, w, b, id, m, n] {
      const Tensor& X = v(x.id);
      const Tensor& W = v(w.id);
      const Tensor& G = g(id);
      const int k = X.dim(1);
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += G.at(i, j) * W.at(p, j);
          g(x.id).at(i, p) += acc;
        }
      for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i) acc += X.at(i, p) * G.at(i, j);
          g(w.id).at(p, j) += acc;
        }
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += G.at(i, j);
        g(b.id).at(j) += acc;
      }
    };
  }
  return {id};
}

Var Tape::conv_patch(Var x, Var w, int stride) {
  const Tensor& X = v(x.id);
  const Tensor& W = v(w.id);
  require(X.ndim() == 3 && W.ndim() == 4, "tape conv_patch: bad ranks");
  const int h = X.dim(0), wd = X.dim(1), ci = X.dim(2);
  const int p = W.dim(0);
  require(W.dim(1) == p && W.dim(2) == ci, "tape conv_patch: kernel mismatch");
  require(h % stride == 0 && wd % stride == 0 && p == stride,
          "tape conv_patch: extent not divisible by stride");
  const int co = W.dim(3);
  const int ho = h / stride, wo = wd / stride;
  Tensor out({ho, wo, co});
  for (int oi = 0; oi < ho; ++oi)
    for (int oj = 0; oj < wo; ++oj)
      for (int ki = 0; ki < p; ++ki)
        for (int kj = 0; kj < p; ++kj)
          for (int c = 0; c < ci; ++c) {
            const double xv = X.at(oi * stride + ki, oj * stride + kj, c);
            if (xv == 0.0) continue;
            const double* wrow = &W.data[((static_cast<size_t>(ki) * p + kj) * ci + c) * co];
            double* orow = &out.at(oi, oj, 0);
            for (int o = 0; o < co; ++o) orow[o] += xv * wrow[o];
          }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, w, id, stride, ho, wo, p, ci, co] {
      const Tensor& X2 = v(x.id);
      const Tensor& W2 = v(w.id);
      const Tensor& G = g(id);
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj)
          for (int ki = 0; ki < p; ++ki)
            for (int kj = 0; kj < p; ++kj)
              for (int c = 0; c < ci; ++c) {
                const int xi = oi * stride + ki, xj = oj * stride + kj;
                const double xv = X2.at(xi, xj, c);
                double gx = 0.0;
                const size_t wbase = ((static_cast<size_t>(ki) * p + kj) * ci + c) * co;
                for (int o = 0; o < co; ++o) {
                  const double gv = G.at(oi, oj, o);
                  gx += gv * W2.data[wbase + o];
                  g(w.id).data[wbase + o] += gv * xv;
                }
                g(x.id).at(xi, xj, c) += gx;
              }
    };
  }
  return {id};
}

Var Tape::dwconv3(Var x, Var w) {
  const Tensor& X = v(x.id);
  const Tensor& W = v(w.id);
  require(X.ndim() == 3 && W.ndim() == 3 && W.dim(0) == 3 && W.dim(1) == 3 &&
              W.dim(2) == X.dim(2),
          "tape dwconv3: bad shapes");
  const int h = X.dim(0), wd = X.dim(1), c = X.dim(2);
  Tensor out({h, wd, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < wd; ++j)
      for (int ki = -1; ki <= 1; ++ki)
        for (int kj = -1; kj <= 1; ++kj) {
          const int si = i + ki, sj = j + kj;
          if (si < 0 || si >= h || sj < 0 || sj >= wd) continue;
          const double* src = X.data.data() + (static_cast<size_t>(si) * wd + sj) * c;
          const double* ker = W.data.data() + (static_cast<size_t>(ki + 1) * 3 + kj + 1) * c;
          double* dst = &out.at(i, j, 0);
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch] * ker[ch];
        }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, w, id, h, wd, c] {
      const Tensor& X2 = v(x.id);
      const Tensor& W2 = v(w.id);
      const Tensor& G = g(id);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < wd; ++j)
          for (int ki = -1; ki <= 1; ++ki)
            for (int kj = -1; kj <= 1; ++kj) {
              const int si = i + ki, sj = j + kj;
              if (si < 0 || si >= h || sj < 0 || sj >= wd) continue;
              for (int ch = 0; ch < c; ++ch) {
                const double gv = G.at(i, j, ch);
                g(x.id).at(si, sj, ch) += gv * W2.at(ki + 1, kj + 1, ch);
                g(w.id).at(ki + 1, kj + 1, ch) += gv * X2.at(si, sj, ch);
              }
            }
    };
  }
  return {id};
}

Var Tape::spike(Var u_tilde, const LifParams& lif, const SurrogateParams& sg, SpikeMode mode) {
  const Tensor& U = v(u_tilde.id);
  Tensor out = U;
  for (int i = 0; i < out.numel(); ++i) {
    out.at(i) = (mode == SpikeMode::binary) ? (U.at(i) >= lif.theta ? 1.0 : 0.0)
                                            : relaxed_spike(U.at(i), lif, sg);
  }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, u_tilde, id, lif, sg] {
      const Tensor& U2 = v(u_tilde.id);
      for (int i = 0; i < g(id).numel(); ++i) {
        g(u_tilde.id).at(i) += g(id).at(i) * surrogate_grad(U2.at(i), lif, sg);
      }
    };
  }
  return {id};
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
  const Tensor& X = v(x.id);
  const int c = X.row_width();
  Tensor out({static_cast<int>(idx.size()), c});
  for (size_t r = 0; r < idx.size(); ++r) {
    auto src = X.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(r)).begin());
  }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, id, idx = std::move(idx), c] {
      const Tensor& G = g(id);
      for (size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < c; ++j)
          g(x.id).data[static_cast<size_t>(idx[r]) * c + j] +=
              G.data[r * static_cast<size_t>(c) + j];
    };
  }
  return {id};
}

Var Tape::scatter_rows(Var base, Var rows, std::vector<int> idx) {
  const Tensor& B = v(base.id);
  const Tensor& R = v(rows.id);
  const int c = B.row_width();
  require(R.row_width() == c && R.rows() == static_cast<int>(idx.size()),
          "tape scatter_rows: shape mismatch");
  Tensor out = B;  // bypassed rows are carried over bit-for-bit
  for (size_t r = 0; r < idx.size(); ++r) {
    auto src = R.row(static_cast<int>(r));
    std::copy(src.begin(), src.end(), out.row(idx[r]).begin());
  }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, base, rows, id, idx = std::move(idx), c] {
      const Tensor& G = g(id);
      std::vector<char> replaced(static_cast<size_t>(v(base.id).rows()), 0);
      for (int r : idx) replaced[static_cast<size_t>(r)] = 1;
      for (int i = 0; i < v(base.id).rows(); ++i) {
        if (replaced[static_cast<size_t>(i)]) continue;
        for (int j = 0; j < c; ++j)
          g(base.id).data[static_cast<size_t>(i) * c + j] +=
              G.data[static_cast<size_t>(i) * c + j];
      }
      for (size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < c; ++j)
          g(rows.id).data[r * static_cast<size_t>(c) + j] +=
              G.data[static_cast<size_t>(idx[r]) * c + j];
    };
  }
  return {id};
}

Var Tape::mean_rows(Var x) {
  const Tensor& X = v(x.id);
  const int n = X.rows(), c = X.row_width();
  Tensor out({1, c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) out.at(0, j) += X.data[static_cast<size_t>(i) * c + j];
  for (int j = 0; j < c; ++j) out.at(0, j) /= n;
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, id, n, c] {
      const Tensor& G = g(id);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
          g(x.id).data[static_cast<size_t>(i) * c + j] += G.at(0, j) / n;
    };
  }
  return {id};
}

Var Tape::slice_cols(Var x, int c0, int c1) {
  const Tensor& X = v(x.id);
  const int n = X.rows(), c = X.row_width();
  require(0 <= c0 && c0 < c1 && c1 <= c, "tape slice_cols: bad range");
  Tensor out({n, c1 - c0});
  for (int i = 0; i < n; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = X.data[static_cast<size_t>(i) * c + j];
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, id, n, c, c0, c1] {
      const Tensor& G = g(id);
      for (int i = 0; i < n; ++i)
        for (int j = c0; j < c1; ++j)
          g(x.id).data[static_cast<size_t>(i) * c + j] += G.at(i, j - c0);
    };
  }
  return {id};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "tape concat_cols: empty");
  const int n = v(parts[0].id).rows();
  int total = 0;
  for (Var p : parts) {
    require(v(p.id).rows() == n, "tape concat_cols: row mismatch");
    total += v(p.id).row_width();
  }
  Tensor out({n, total});
  int off = 0;
  for (Var p : parts) {
    const Tensor& P = v(p.id);
    const int w = P.row_width();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) out.at(i, off + j) = P.data[static_cast<size_t>(i) * w + j];
    off += w;
  }
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, parts, id, n, total] {
      const Tensor& G = g(id);
      int off2 = 0;
      for (Var p : parts) {
        const int w = v(p.id).row_width();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < w; ++j)
            g(p.id).data[static_cast<size_t>(i) * w + j] += G.at(i, off2 + j);
        off2 += w;
      }
    };
  }
  return {id};
}

Var Tape::reshape(Var x, Shape s) {
  require(shape_numel(s) == v(x.id).numel(), "tape reshape: element count mismatch");
  Tensor out = v(x.id);
  out.shape = s;
  int id = push(std::move(out));
  if (recording) {
    backs_.back() = [this, x, id] {
      for (int i = 0; i < g(id).numel(); ++i) g(x.id).at(i) += g(id).at(i);
    };
  }
  return {id};
}

void Tape::backward(Var out, const Tensor& seed) {
  if (!recording) throw std::logic_error("tape backward: tape was not recording");
  require(seed.same_shape(v(out.id)), "tape backward: seed shape mismatch");
  grads_.clear();
  grads_.reserve(values_.size());
  for (const Tensor& t : values_) grads_.push_back(Tensor::zeros(t.shape));
  grads_[static_cast<size_t>(out.id)] = seed;
  for (size_t i = backs_.size(); i-- > 0;) {
    if (backs_[i]) backs_[i]();
  }
}

}  // namespace sp
