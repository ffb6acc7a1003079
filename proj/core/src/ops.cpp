#include "msstrn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msstrn/errors.hpp"

namespace msstrn::ops {

namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const char* op, Var a, std::size_t min_rank) {
  if (a.shape().size() < min_rank) {
    throw ShapeError(std::string(op) + ": needs rank >= " + std::to_string(min_rank) + ", got " +
                     to_string(a.shape()));
  }
}

std::size_t product(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

// c (m x n) += a (m x k) * b (k x n)
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c (m x k) += a (m x n) * b^T where b is (k x n)
void gemm_acc_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c (k x n) += a^T * b where a is (m x k), b is (m x n)
void gemm_acc_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void add_into(DenseArray& dst, const DenseArray& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

DenseArray permute_values(const DenseArray& in, std::span<const std::size_t> axes) {
  const Shape& shape = in.shape();
  const std::size_t rank = shape.size();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = shape[axes[i]];
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * shape[i];
  std::vector<std::size_t> stride_for_out(rank);
  for (std::size_t i = 0; i < rank; ++i) stride_for_out[i] = in_strides[axes[i]];

  DenseArray out(out_shape);
  std::vector<std::size_t> idx(rank, 0);
  auto src = in.data();
  auto dst = out.data();
  std::size_t src_off = 0;
  for (std::size_t flat = 0; flat < dst.size(); ++flat) {
    dst[flat] = src[src_off];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src_off += stride_for_out[ax];
      if (idx[ax] < out_shape[ax]) break;
      src_off -= stride_for_out[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

template <class Fn, class Deriv>
Var unary(const char* op, Var a, Fn fn, Deriv deriv) {
  DenseArray out(a.shape());
  auto x = a.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fn(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(out), {a}, [ia, deriv](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto xv = t.value(ia).data();
    auto yv = t.value(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  DenseArray out = a.value();
  add_into(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.requires_grad(ia)) add_into(t.grad(ia), t.grad(self));
    if (t.requires_grad(ib)) add_into(t.grad(ib), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  DenseArray out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.requires_grad(ia)) add_into(t.grad(ia), t.grad(self));
    if (t.requires_grad(ib)) {
      auto g = t.grad(self).data();
      auto gb = t.grad(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  DenseArray out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    if (t.requires_grad(ia)) {
      auto ga = t.grad(ia).data();
      auto bv = t.value(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad(ib).data();
      auto av = t.value(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var abs(Var a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var matmul(Var a, Var b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  DenseArray out({m, n});
  gemm_acc(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b},
                         [ia, ib, m, k, n](Tape& t, std::size_t self) {
                           const double* g = t.grad(self).data().data();
                           if (t.requires_grad(ia)) {
                             gemm_acc_bt(g, t.value(ib).data().data(), t.grad(ia).data().data(), m,
                                         n, k);
                           }
                           if (t.requires_grad(ib)) {
                             gemm_acc_at(t.value(ia).data().data(), g, t.grad(ib).data().data(), m,
                                         k, n);
                           }
                         });
}

Var batched_matmul(Var a, Var b) {
  require_rank("batched_matmul", a, 3);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t r = sa.size();
  if (sb.size() != r || !std::equal(sa.begin(), sa.end() - 2, sb.begin()) ||
      sa[r - 1] != sb[r - 2]) {
    throw ShapeError("batched_matmul: incompatible " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t batch = product(sa, 0, r - 2);
  const std::size_t m = sa[r - 2], k = sa[r - 1], n = sb[r - 1];
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  DenseArray out(out_shape);
  const double* av = a.value().data().data();
  const double* bv = b.value().data().data();
  double* ov = out.data().data();
  for (std::size_t i = 0; i < batch; ++i) gemm_acc(av + i * m * k, bv + i * k * n, ov + i * m * n, m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      "batched_matmul", std::move(out), {a, b}, [ia, ib, batch, m, k, n](Tape& t, std::size_t self) {
        const double* g = t.grad(self).data().data();
        if (t.requires_grad(ia)) {
          const double* bv = t.value(ib).data().data();
          double* ga = t.grad(ia).data().data();
          for (std::size_t i = 0; i < batch; ++i) {
            gemm_acc_bt(g + i * m * n, bv + i * k * n, ga + i * m * k, m, n, k);
          }
        }
        if (t.requires_grad(ib)) {
          const double* av = t.value(ia).data().data();
          double* gb = t.grad(ib).data().data();
          for (std::size_t i = 0; i < batch; ++i) {
            gemm_acc_at(av + i * m * k, g + i * m * n, gb + i * k * n, m, k, n);
          }
        }
      });
}

Var linear(Var x, Var w) {
  require_rank("linear", x, 1);
  const Shape& sx = x.shape();
  if (w.shape().size() != 2 || w.shape()[0] != sx.back()) {
    throw ShapeError("linear: incompatible " + to_string(sx) + " x " + to_string(w.shape()));
  }
  const std::size_t k = sx.back(), n = w.shape()[1];
  const std::size_t m = x.value().size() / k;
  Shape out_shape = sx;
  out_shape.back() = n;
  DenseArray out(out_shape);
  gemm_acc(x.value().data().data(), w.value().data().data(), out.data().data(), m, k, n);
  const std::size_t ix = x.id(), iw = w.id();
  return x.tape().record("linear", std::move(out), {x, w}, [ix, iw, m, k, n](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data().data();
    if (t.requires_grad(ix)) gemm_acc_bt(g, t.value(iw).data().data(), t.grad(ix).data().data(), m, n, k);
    if (t.requires_grad(iw)) gemm_acc_at(t.value(ix).data().data(), g, t.grad(iw).data().data(), m, k, n);
  });
}

Var graph_mix(Var g, Var x) {
  const Shape& sg = g.shape();
  const Shape& sx = x.shape();
  if (sg.size() != 2 || sg[0] != sg[1] || sx.size() != 3 || sx[1] != sg[0]) {
    throw ShapeError("graph_mix: incompatible " + to_string(sg) + " with " + to_string(sx));
  }
  const std::size_t p = sx[0], n = sx[1], c = sx[2];
  DenseArray out(sx);
  const double* gv = g.value().data().data();
  const double* xv = x.value().data().data();
  double* ov = out.data().data();
  for (std::size_t i = 0; i < p; ++i) gemm_acc(gv, xv + i * n * c, ov + i * n * c, n, n, c);
  const std::size_t ig = g.id(), ix = x.id();
  return g.tape().record("graph_mix", std::move(out), {g, x}, [ig, ix, p, n, c](Tape& t, std::size_t self) {
    const double* gy = t.grad(self).data().data();
    if (t.requires_grad(ix)) {
      // dX[p] += G^T dY[p]
      const double* gv = t.value(ig).data().data();
      double* gx = t.grad(ix).data().data();
      for (std::size_t i = 0; i < p; ++i) gemm_acc_at(gv, gy + i * n * c, gx + i * n * c, n, n, c);
    }
    if (t.requires_grad(ig)) {
      // dG += dY[p] X[p]^T
      const double* xv = t.value(ix).data().data();
      double* gg = t.grad(ig).data().data();
      for (std::size_t i = 0; i < p; ++i) gemm_acc_bt(gy + i * n * c, xv + i * n * c, gg, n, c, n);
    }
  });
}

Var node_matmul(Var z, Var theta) {
  const Shape& sz = z.shape();
  const Shape& st = theta.shape();
  if (sz.size() != 3 || st.size() != 3 || sz[1] != st[0] || sz[2] != st[1]) {
    throw ShapeError("node_matmul: incompatible " + to_string(sz) + " with " + to_string(st));
  }
  const std::size_t p = sz[0], n = sz[1], j = sz[2], o = st[2];
  DenseArray out({p, n, o});
  const double* zv = z.value().data().data();
  const double* tv = theta.value().data().data();
  double* ov = out.data().data();
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      gemm_acc(zv + (a * n + b) * j, tv + b * j * o, ov + (a * n + b) * o, 1, j, o);
    }
  }
  const std::size_t iz = z.id(), it = theta.id();
  return z.tape().record("node_matmul", std::move(out), {z, theta},
                         [iz, it, p, n, j, o](Tape& t, std::size_t self) {
                           const double* gy = t.grad(self).data().data();
                           if (t.requires_grad(iz)) {
                             const double* tv = t.value(it).data().data();
                             double* gz = t.grad(iz).data().data();
                             for (std::size_t a = 0; a < p; ++a) {
                               for (std::size_t b = 0; b < n; ++b) {
                                 gemm_acc_bt(gy + (a * n + b) * o, tv + b * j * o,
                                             gz + (a * n + b) * j, 1, o, j);
                               }
                             }
                           }
                           if (t.requires_grad(it)) {
                             const double* zv = t.value(iz).data().data();
                             double* gt = t.grad(it).data().data();
                             for (std::size_t a = 0; a < p; ++a) {
                               for (std::size_t b = 0; b < n; ++b) {
                                 gemm_acc_at(zv + (a * n + b) * j, gy + (a * n + b) * o,
                                             gt + b * j * o, 1, j, o);
                               }
                             }
                           }
                         });
}

Var transpose_last(Var a) {
  require_rank("transpose_last", a, 2);
  std::vector<std::size_t> axes(a.shape().size());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(a, axes);
}

Var permute(Var a, std::span<const std::size_t> axes) {
  const std::size_t rank = a.shape().size();
  std::vector<bool> seen(rank, false);
  if (axes.size() != rank) throw ShapeError("permute: axes rank mismatch for " + to_string(a.shape()));
  for (std::size_t ax : axes) {
    if (ax >= rank || seen[ax]) throw ShapeError("permute: invalid axes for " + to_string(a.shape()));
    seen[ax] = true;
  }
  std::vector<std::size_t> inverse(rank);
  for (std::size_t i = 0; i < rank; ++i) inverse[axes[i]] = i;
  const std::size_t ia = a.id();
  return a.tape().record("permute", permute_values(a.value(), axes), {a},
                         [ia, inverse](Tape& t, std::size_t self) {
                           add_into(t.grad(ia), permute_values(t.grad(self), inverse));
                         });
}

Var reshape(Var a, Shape shape) {
  DenseArray out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  out_shape.back() = 0;
  std::vector<std::size_t> widths;
  bool needs_grad = false;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw ShapeError("concat_last: incompatible " + to_string(first) + " and " + to_string(s));
    }
    widths.push_back(s.back());
    out_shape.back() += s.back();
    needs_grad = needs_grad || p.requires_grad();
  }
  const std::size_t rows = element_count(first) / first.back();
  const std::size_t total = out_shape.back();
  DenseArray out(out_shape);
  std::vector<std::size_t> ids;
  std::size_t col = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    auto src = parts[q].value().data();
    auto dst = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.begin() + r * widths[q], widths[q], dst.begin() + r * total + col);
    }
    col += widths[q];
    ids.push_back(parts[q].id());
  }
  return parts[0].tape().record(
      "concat_last", std::move(out), needs_grad, [ids, widths, rows, total](Tape& t, std::size_t self) {
        auto g = t.grad(self).data();
        std::size_t col = 0;
        for (std::size_t q = 0; q < ids.size(); ++q) {
          if (t.requires_grad(ids[q])) {
            auto gq = t.grad(ids[q]).data();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[q]; ++c) gq[r * widths[q] + c] += g[r * total + col + c];
            }
          }
          col += widths[q];
        }
      });
}

Var slice_last(Var a, std::size_t begin, std::size_t width) {
  require_rank("slice_last", a, 1);
  const Shape& s = a.shape();
  if (width == 0 || begin + width > s.back()) {
    throw ShapeError("slice_last: range out of bounds for " + to_string(s));
  }
  const std::size_t total = s.back();
  const std::size_t rows = a.value().size() / total;
  Shape out_shape = s;
  out_shape.back() = width;
  DenseArray out(out_shape);
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src.begin() + r * total + begin, width, dst.begin() + r * width);
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice_last", std::move(out), {a},
                         [ia, rows, total, begin, width](Tape& t, std::size_t self) {
                           auto g = t.grad(self).data();
                           auto ga = t.grad(ia).data();
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < width; ++c) ga[r * total + begin + c] += g[r * width + c];
                           }
                         });
}

Var stack(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const Shape& first = parts[0].shape();
  if (axis > first.size()) throw ShapeError("stack: axis out of range for " + to_string(first));
  bool needs_grad = false;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.shape() != first) throw ShapeError("stack: mismatched " + to_string(first) + " and " + to_string(p.shape()));
    needs_grad = needs_grad || p.requires_grad();
    ids.push_back(p.id());
  }
  const std::size_t outer = product(first, 0, axis);
  const std::size_t inner = product(first, axis, first.size());
  const std::size_t count = parts.size();
  Shape out_shape = first;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  DenseArray out(out_shape);
  auto dst = out.data();
  for (std::size_t q = 0; q < count; ++q) {
    auto src = parts[q].value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + o * inner, inner, dst.begin() + (o * count + q) * inner);
    }
  }
  return parts[0].tape().record("stack", std::move(out), needs_grad,
                                [ids, outer, inner, count](Tape& t, std::size_t self) {
                                  auto g = t.grad(self).data();
                                  for (std::size_t q = 0; q < count; ++q) {
                                    if (!t.requires_grad(ids[q])) continue;
                                    auto gq = t.grad(ids[q]).data();
                                    for (std::size_t o = 0; o < outer; ++o) {
                                      for (std::size_t i = 0; i < inner; ++i) {
                                        gq[o * inner + i] += g[(o * count + q) * inner + i];
                                      }
                                    }
                                  }
                                });
}

Var select(Var a, std::size_t axis, std::size_t index) {
  const Shape& s = a.shape();
  if (axis >= s.size() || index >= s[axis]) {
    throw ShapeError("select: index " + std::to_string(index) + " on axis " + std::to_string(axis) +
                     " out of range for " + to_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t count = s[axis];
  const std::size_t inner = product(s, axis + 1, s.size());
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  DenseArray out(out_shape);
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src.begin() + (o * count + index) * inner, inner, dst.begin() + o * inner);
  }
  const std::size_t ia = a.id();
  return a.tape().record("select", std::move(out), {a},
                         [ia, outer, count, inner, index](Tape& t, std::size_t self) {
                           auto g = t.grad(self).data();
                           auto ga = t.grad(ia).data();
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t i = 0; i < inner; ++i) {
                               ga[(o * count + index) * inner + i] += g[o * inner + i];
                             }
                           }
                         });
}

Var add_trailing(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()))) {
    throw ShapeError("add_trailing: " + to_string(sb) + " is not a trailing block of " + to_string(sa));
  }
  const std::size_t block = b.value().size();
  const std::size_t reps = a.value().size() / block;
  DenseArray out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < block; ++i) o[r * block + i] += bv[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add_trailing", std::move(out), {a, b},
                         [ia, ib, reps, block](Tape& t, std::size_t self) {
                           if (t.requires_grad(ia)) add_into(t.grad(ia), t.grad(self));
                           if (t.requires_grad(ib)) {
                             auto g = t.grad(self).data();
                             auto gb = t.grad(ib).data();
                             for (std::size_t r = 0; r < reps; ++r) {
                               for (std::size_t i = 0; i < block; ++i) gb[i] += g[r * block + i];
                             }
                           }
                         });
}

Var softmax_rows(Var a) {
  require_rank("softmax_rows", a, 1);
  if (!a.value().all_finite()) throw NumericError("softmax_rows: non-finite input");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.value().size() / cols;
  DenseArray out(a.shape());
  auto x = a.value().data();
  auto y = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      total += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
  }
  const std::size_t ia = a.id();
  return a.tape().record("softmax_rows", std::move(out), {a}, [ia, rows, cols](Tape& t, std::size_t self) {
    auto g = t.grad(self).data();
    auto y = t.value(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    }
  });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  require_rank("layer_norm", a, 1);
  const std::size_t cols = a.shape().back();
  if (gain.shape() != Shape{cols} || bias.shape() != Shape{cols}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(cols) + "], got " +
                     to_string(gain.shape()) + " and " + to_string(bias.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = a.value().size() / cols;
  DenseArray out(a.shape());
  std::vector<double> normalized(a.value().size());
  std::vector<double> inv_std(rows);
  auto x = a.value().data();
  auto y = out.data();
  auto gv = gain.value().data();
  auto bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double m = 0.0;
    for (std::size_t c = 0; c < cols; ++c) m += xr[c];
    m /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - m) * (xr[c] - m);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (xr[c] - m) * inv_std[r];
      normalized[r * cols + c] = xh;
      y[r * cols + c] = gv[c] * xh + bv[c];
    }
  }
  const std::size_t ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(
      "layer_norm", std::move(out), {a, gain, bias},
      [ia, ig, ib, rows, cols, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        auto g = t.grad(self).data();
        if (t.requires_grad(ig)) {
          auto gg = t.grad(ig).data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gg[c] += g[r * cols + c] * normalized[r * cols + c];
          }
        }
        if (t.requires_grad(ib)) {
          auto gb = t.grad(ib).data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
          }
        }
        if (t.requires_grad(ia)) {
          auto gv = t.value(ig).data();
          auto ga = t.grad(ia).data();
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g[r * cols + c] * gv[c];
              mean_d += d;
              mean_dx += d * normalized[r * cols + c];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g[r * cols + c] * gv[c];
              ga[r * cols + c] += inv_std[r] * (d - mean_d - normalized[r * cols + c] * mean_dx);
            }
          }
        }
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", DenseArray::scalar(total), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ia).data()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

}  // namespace msstrn::ops
