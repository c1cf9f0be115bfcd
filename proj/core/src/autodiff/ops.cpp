#include "recore/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "recore/common/error.hpp"

namespace recore::ad {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

[[noreturn]] void shape_error(const char* op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

int normalize_axis(const char* op, int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) shape_error(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return a;
}

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
  const Shape s = strip_leading_ones(small);
  if (s.size() > big.size()) return false;
  return std::equal(s.begin(), s.end(), big.end() - static_cast<std::ptrdiff_t>(s.size()));
}

// Index extents for a broadcasting binary op: element i of the output reads
// a[i % na] and b[i % nb].
struct Broadcast {
  Shape out;
  std::int64_t na;
  std::int64_t nb;
  bool same;
};

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return {a, numel(a), numel(b), true};
  const auto na = numel(a);
  const auto nb = numel(b);
  if (nb == 1 || is_suffix(b, a)) return {a, na, nb, false};
  if (na == 1 || is_suffix(a, b)) return {b, na, nb, false};
  shape_error(op, a, b);
}

template <typename T, typename F, typename DF>
BasicVar<T> unary(const char* op, const BasicVar<T>& x, F f, DF df) {
  const auto& xv = x.value();
  BasicArray<T> out(xv.shape());
  const auto n = xv.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(xv[i]);
  return make_node<T>(op, std::move(out), {x.ptr()}, [df](Node<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    const auto m = self.value.size();
    for (std::int64_t i = 0; i < m; ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

// dfa(a, b) = d out / d a, dfb(a, b) = d out / d b
template <typename T, typename F, typename DFA, typename DFB>
BasicVar<T> binary(const char* op, const BasicVar<T>& a, const BasicVar<T>& b, F f, DFA dfa, DFB dfb) {
  const Broadcast bc = plan_broadcast(op, a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  BasicArray<T> out(bc.out);
  const auto n = out.size();
  if (bc.same) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = f(av[i % bc.na], bv[i % bc.nb]);
  }
  return make_node<T>(op, std::move(out), {a.ptr(), b.ptr()}, [bc, dfa, dfb](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto m = self.value.size();
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const auto ia = i % bc.na;
        g[ia] += self.grad[i] * dfa(pa.value[ia], pb.value[i % bc.nb]);
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const auto ib = i % bc.nb;
        g[ib] += self.grad[i] * dfb(pa.value[i % bc.na], pb.value[ib]);
      }
    }
  });
}

// Geometry of a strided 2-D correlation from an image of extent (h, w) to an
// output grid of extent (oh, ow).
struct ConvGeom {
  std::int64_t channels, h, w, kh, kw, oh, ow;
  int stride, pad;
  std::int64_t rows() const { return channels * kh * kw; }
  std::int64_t cols() const { return oh * ow; }
};

// Output columns [lo, hi) whose input column for kernel offset kj is in range.
inline void valid_cols(const ConvGeom& g, std::int64_t kj, std::int64_t& lo, std::int64_t& hi) {
  const std::int64_t first = g.pad - kj;  // ix = ox * stride - first
  lo = first > 0 ? (first + g.stride - 1) / g.stride : 0;
  hi = std::min<std::int64_t>(g.ow, (g.w - 1 + first) / g.stride + 1);
  if (g.w - 1 + first < 0) hi = 0;
  lo = std::min(lo, g.ow);
  hi = std::max(hi, lo);
}

// cols is a [rows, ld] row-major matrix; this image fills columns [0, g.cols()).
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* cols, std::int64_t ld) {
  const std::int64_t s = g.stride;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * ld;
        std::int64_t lo, hi;
        valid_cols(g, kj, lo, hi);
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * s - g.pad + ki;
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = img + (c * g.h + iy) * g.w - g.pad + kj;
          std::fill(dst, dst + lo, T(0));
          for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * s];
          std::fill(dst + hi, dst + g.ow, T(0));
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* img, std::int64_t ld) {
  const std::int64_t s = g.stride;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * ld;
        std::int64_t lo, hi;
        valid_cols(g, kj, lo, hi);
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * s - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.ow;
          T* dst = img + (c * g.h + iy) * g.w - g.pad + kj;
          for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox * s] += src[ox];
        }
      }
    }
  }
}

template <typename T>
void softmax_rows(const BasicArray<T>& x, BasicArray<T>& y) {
  const auto c = x.dim(-1);
  const auto rows = x.size() / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.ptr() + r * c;
    T* yr = y.ptr() + r * c;
    const T mx = *std::max_element(xr, xr + c);
    T s = 0;
    for (std::int64_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (std::int64_t j = 0; j < c; ++j) yr[j] /= s;
  }
}

// g_x += p * (g_y - <g_y, p>) row-wise.
template <typename T>
void softmax_backward_rows(const BasicArray<T>& p, const BasicArray<T>& gy, BasicArray<T>& gx) {
  const auto c = p.dim(-1);
  const auto rows = p.size() / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* pr = p.ptr() + r * c;
    const T* gr = gy.ptr() + r * c;
    T dot = 0;
    for (std::int64_t j = 0; j < c; ++j) dot += gr[j] * pr[j];
    T* out = gx.ptr() + r * c;
    for (std::int64_t j = 0; j < c; ++j) out[j] += pr[j] * (gr[j] - dot);
  }
}

struct AxisSplit {
  std::int64_t outer, dim, inner;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit a{1, s[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) a.outer *= s[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  return binary<T>("add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
                   [](T, T) { return T(1); });
}

template <typename T>
BasicVar<T> sub(const BasicVar<T>& a, const BasicVar<T>& b) {
  return binary<T>("sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
                   [](T, T) { return T(-1); });
}

template <typename T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
  return binary<T>("mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
                   [](T x, T) { return x; });
}

template <typename T>
BasicVar<T> div(const BasicVar<T>& a, const BasicVar<T>& b) {
  return binary<T>("div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
                   [](T x, T y) { return -x / (y * y); });
}

template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T s) {
  return unary<T>("scale", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
BasicVar<T> add_scalar(const BasicVar<T>& x, T s) {
  return unary<T>("add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
BasicVar<T> matmul(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicArray<T> out(Shape{m, n});
  MapM<T>(out.ptr(), m, n).noalias() = CMapM<T>(a.value().ptr(), m, k) * CMapM<T>(b.value().ptr(), k, n);
  return make_node<T>("matmul", std::move(out), {a.ptr(), b.ptr()}, [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    CMapM<T> gy(self.grad.ptr(), m, n);
    if (pa.requires_grad) {
      MapM<T>(pa.ensure_grad().ptr(), m, k).noalias() += gy * CMapM<T>(pb.value.ptr(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapM<T>(pb.ensure_grad().ptr(), k, n).noalias() += CMapM<T>(pa.value.ptr(), m, k).transpose() * gy;
    }
  });
}

template <typename T>
BasicVar<T> transpose(const BasicVar<T>& a) {
  if (a.value().rank() != 2) shape_error("transpose", "expected rank 2, got " + to_string(a.shape()));
  const auto m = a.dim(0), n = a.dim(1);
  BasicArray<T> out(Shape{n, m});
  MapM<T>(out.ptr(), n, m) = CMapM<T>(a.value().ptr(), m, n).transpose();
  return make_node<T>("transpose", std::move(out), {a.ptr()}, [m, n](Node<T>& self) {
    auto& p = *self.parents[0];
    MapM<T>(p.ensure_grad().ptr(), m, n) += CMapM<T>(self.grad.ptr(), n, m).transpose();
  });
}

template <typename T>
BasicVar<T> linear(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b) {
  return add(matmul(x, w), b);
}

// Images per GEMM so the column buffer stays near 256K scalars (cache sized).
std::int64_t conv_chunk(const ConvGeom& g, std::int64_t n) {
  const std::int64_t per = std::max<std::int64_t>(1, g.rows() * g.cols());
  return std::clamp<std::int64_t>((std::int64_t{1} << 18) / per, 1, n);
}

template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1]) shape_error("conv2d", xs, ws);
  if (stride < 1 || pad < 0) shape_error("conv2d", "stride must be >= 1 and pad >= 0");
  const bool has_bias = b.valid();
  if (has_bias && (b.value().rank() != 1 || b.dim(0) != ws[0])) shape_error("conv2d", ws, b.shape());
  const std::int64_t n = xs[0], oc = ws[0];
  ConvGeom g{xs[1], xs[2], xs[3], ws[2], ws[3], 0, 0, stride, pad};
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) shape_error("conv2d", xs, ws);
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;

  // Images are processed in chunks: the columns of `chunk` images sit side
  // by side so each layer runs one large GEMM per chunk.
  const std::int64_t chunk = conv_chunk(g, n);
  const auto nc = g.cols();
  const auto in_stride = g.channels * g.h * g.w;
  const auto out_stride = oc * nc;
  BasicArray<T> out(Shape{n, oc, g.oh, g.ow});
  AlignedVector<T> cols(static_cast<std::size_t>(g.rows() * nc * chunk));
  MatRM<T> y(oc, nc * chunk);
  CMapM<T> wm(w.value().ptr(), oc, g.rows());
  for (std::int64_t i0 = 0; i0 < n; i0 += chunk) {
    const auto k = std::min(chunk, n - i0);
    const auto ld = nc * k;
    for (std::int64_t j = 0; j < k; ++j) im2col(x.value().ptr() + (i0 + j) * in_stride, g, cols.data() + j * nc, ld);
    y.leftCols(ld).noalias() = wm * CMapM<T>(cols.data(), g.rows(), ld);
    for (std::int64_t j = 0; j < k; ++j) {
      MapM<T> yo(out.ptr() + (i0 + j) * out_stride, oc, nc);
      yo = y.middleCols(j * nc, nc);
      if (has_bias) {
        for (std::int64_t o = 0; o < oc; ++o) yo.row(o).array() += b.value()[o];
      }
    }
  }
  std::vector<NodePtr<T>> parents{x.ptr(), w.ptr()};
  if (has_bias) parents.push_back(b.ptr());
  return make_node<T>("conv2d", std::move(out), std::move(parents),
                      [g, n, oc, nc, chunk, in_stride, out_stride](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        CMapM<T> gy(self.grad.ptr() + i * out_stride, oc, nc);
        for (std::int64_t o = 0; o < oc; ++o) gb[o] += gy.row(o).sum();
      }
    }
    if (!px.requires_grad && !pw.requires_grad) return;
    AlignedVector<T> cols(static_cast<std::size_t>(g.rows() * nc * chunk));
    MatRM<T> gy(oc, nc * chunk);
    for (std::int64_t i0 = 0; i0 < n; i0 += chunk) {
      const auto k = std::min(chunk, n - i0);
      const auto ld = nc * k;
      for (std::int64_t j = 0; j < k; ++j) {
        gy.middleCols(j * nc, nc) = CMapM<T>(self.grad.ptr() + (i0 + j) * out_stride, oc, nc);
      }
      if (pw.requires_grad) {
        for (std::int64_t j = 0; j < k; ++j) {
          im2col(px.value.ptr() + (i0 + j) * in_stride, g, cols.data() + j * nc, ld);
        }
        MapM<T>(pw.ensure_grad().ptr(), oc, g.rows()).noalias() +=
            gy.leftCols(ld) * CMapM<T>(cols.data(), g.rows(), ld).transpose();
      }
      if (px.requires_grad) {
        MapM<T>(cols.data(), g.rows(), ld).noalias() =
            CMapM<T>(pw.value.ptr(), oc, g.rows()).transpose() * gy.leftCols(ld);
        auto& gx = px.ensure_grad();
        for (std::int64_t j = 0; j < k; ++j) col2im(cols.data() + j * nc, g, gx.ptr() + (i0 + j) * in_stride, ld);
      }
    }
  });
}

template <typename T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& x, const BasicVar<T>& w, const BasicVar<T>& b, int stride, int pad,
                             int output_pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0]) shape_error("conv_transpose2d", xs, ws);
  if (stride < 1 || pad < 0 || output_pad < 0 || output_pad >= stride) {
    shape_error("conv_transpose2d", "need stride >= 1, pad >= 0, 0 <= output_pad < stride");
  }
  const bool has_bias = b.valid();
  if (has_bias && (b.value().rank() != 1 || b.dim(0) != ws[1])) shape_error("conv_transpose2d", ws, b.shape());
  const std::int64_t n = xs[0], ic = xs[1], oc = ws[1];
  const std::int64_t oh = (xs[2] - 1) * stride - 2 * pad + ws[2] + output_pad;
  const std::int64_t ow = (xs[3] - 1) * stride - 2 * pad + ws[3] + output_pad;
  if (oh <= 0 || ow <= 0) shape_error("conv_transpose2d", xs, ws);
  // The output plays the role of the convolution input; x is the conv output grid.
  const ConvGeom g{oc, oh, ow, ws[2], ws[3], xs[2], xs[3], stride, pad};

  const std::int64_t chunk = conv_chunk(g, n);
  const auto nc = g.cols();
  const auto in_stride = ic * nc;
  const auto out_stride = oc * oh * ow;
  BasicArray<T> out(Shape{n, oc, oh, ow});
  AlignedVector<T> cols(static_cast<std::size_t>(g.rows() * nc * chunk));
  MatRM<T> xin(ic, nc * chunk);
  CMapM<T> wm(w.value().ptr(), ic, g.rows());
  for (std::int64_t i0 = 0; i0 < n; i0 += chunk) {
    const auto k = std::min(chunk, n - i0);
    const auto ld = nc * k;
    for (std::int64_t j = 0; j < k; ++j) {
      xin.middleCols(j * nc, nc) = CMapM<T>(x.value().ptr() + (i0 + j) * in_stride, ic, nc);
    }
    MapM<T>(cols.data(), g.rows(), ld).noalias() = wm.transpose() * xin.leftCols(ld);
    for (std::int64_t j = 0; j < k; ++j) {
      T* y = out.ptr() + (i0 + j) * out_stride;
      col2im(cols.data() + j * nc, g, y, ld);
      if (has_bias) {
        for (std::int64_t c = 0; c < oc; ++c) {
          const T bc = b.value()[c];
          for (std::int64_t q = 0; q < oh * ow; ++q) y[c * oh * ow + q] += bc;
        }
      }
    }
  }
  std::vector<NodePtr<T>> parents{x.ptr(), w.ptr()};
  if (has_bias) parents.push_back(b.ptr());
  return make_node<T>("conv_transpose2d", std::move(out), std::move(parents),
                      [g, n, ic, oc, nc, chunk, in_stride, out_stride](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    const auto plane = g.h * g.w;
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        const T* gy = self.grad.ptr() + i * out_stride;
        for (std::int64_t c = 0; c < oc; ++c) {
          T s = 0;
          for (std::int64_t j = 0; j < plane; ++j) s += gy[c * plane + j];
          gb[c] += s;
        }
      }
    }
    if (!px.requires_grad && !pw.requires_grad) return;
    AlignedVector<T> cols(static_cast<std::size_t>(g.rows() * nc * chunk));
    MatRM<T> buf(ic, nc * chunk);
    for (std::int64_t i0 = 0; i0 < n; i0 += chunk) {
      const auto k = std::min(chunk, n - i0);
      const auto ld = nc * k;
      for (std::int64_t j = 0; j < k; ++j) im2col(self.grad.ptr() + (i0 + j) * out_stride, g, cols.data() + j * nc, ld);
      CMapM<T> gcols(cols.data(), g.rows(), ld);
      if (px.requires_grad) {
        buf.leftCols(ld).noalias() = CMapM<T>(pw.value.ptr(), ic, g.rows()) * gcols;
        auto& gx = px.ensure_grad();
        for (std::int64_t j = 0; j < k; ++j) {
          MapM<T>(gx.ptr() + (i0 + j) * in_stride, ic, nc) += buf.middleCols(j * nc, nc);
        }
      }
      if (pw.requires_grad) {
        for (std::int64_t j = 0; j < k; ++j) {
          buf.middleCols(j * nc, nc) = CMapM<T>(px.value.ptr() + (i0 + j) * in_stride, ic, nc);
        }
        MapM<T>(pw.ensure_grad().ptr(), ic, g.rows()).noalias() += buf.leftCols(ld) * gcols.transpose();
      }
    }
  });
}

template <typename T>
BasicVar<T> elu(const BasicVar<T>& x) {
  const auto df = [](T v, T y) { return v > 0 ? T(1) : y + T(1); };
  if constexpr (std::is_same_v<T, float>) {
    // Vectorized exp; the float training path is hot in every conv layer.
    using A = Eigen::Array<T, Eigen::Dynamic, 1>;
    BasicArray<T> out(x.shape());
    Eigen::Map<const A> in(x.value().ptr(), x.size());
    Eigen::Map<A>(out.ptr(), out.size()) = (in > T(0)).select(in, in.min(T(0)).exp() - T(1));
    return make_node<T>("elu", std::move(out), {x.ptr()}, [](Node<T>& self) {
      auto& p = *self.parents[0];
      const auto m = self.value.size();
      Eigen::Map<const A> xv(p.value.ptr(), m), yv(self.value.ptr(), m), gy(self.grad.ptr(), m);
      Eigen::Map<A>(p.ensure_grad().ptr(), m) += gy * (xv > T(0)).select(A::Ones(m), yv + T(1));
    });
  } else {
    return unary<T>("elu", x, [](T v) { return v > 0 ? v : std::expm1(v); }, df);
  }
}

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x) {
  return unary<T>("relu", x, [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
BasicVar<T> tanh(const BasicVar<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
  return unary<T>("sigmoid", x,
                  [](T v) { return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicVar<T> softplus(const BasicVar<T>& x) {
  return unary<T>("softplus", x,
                  [](T v) { return v > T(20) ? v : (v < T(-20) ? std::exp(v) : std::log1p(std::exp(v))); },
                  [](T v, T) { return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); });
}

template <typename T>
BasicVar<T> exp(const BasicVar<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
BasicVar<T> log(const BasicVar<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
BasicVar<T> square(const BasicVar<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
BasicVar<T> clamp_min(const BasicVar<T>& x, T lo) {
  return unary<T>("clamp_min", x, [lo](T v) { return v > lo ? v : lo; },
                  [lo](T v, T) { return v > lo ? T(1) : T(0); });
}

template <typename T>
BasicVar<T> softmax(const BasicVar<T>& x) {
  if (x.value().rank() < 1) shape_error("softmax", "needs rank >= 1");
  BasicArray<T> out(x.shape());
  softmax_rows(x.value(), out);
  return make_node<T>("softmax", std::move(out), {x.ptr()}, [](Node<T>& self) {
    softmax_backward_rows(self.value, self.grad, self.parents[0]->ensure_grad());
  });
}

template <typename T>
BasicVar<T> log_softmax(const BasicVar<T>& x) {
  if (x.value().rank() < 1) shape_error("log_softmax", "needs rank >= 1");
  const auto& xv = x.value();
  const auto c = xv.dim(-1);
  const auto rows = xv.size() / c;
  BasicArray<T> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = xv.ptr() + r * c;
    const T mx = *std::max_element(xr, xr + c);
    T s = 0;
    for (std::int64_t j = 0; j < c; ++j) s += std::exp(xr[j] - mx);
    const T lse = mx + std::log(s);
    for (std::int64_t j = 0; j < c; ++j) out[r * c + j] = xr[j] - lse;
  }
  return make_node<T>("log_softmax", std::move(out), {x.ptr()}, [c, rows](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      T gs = 0;
      for (std::int64_t j = 0; j < c; ++j) gs += self.grad[r * c + j];
      for (std::int64_t j = 0; j < c; ++j) {
        g[r * c + j] += self.grad[r * c + j] - std::exp(self.value[r * c + j]) * gs;
      }
    }
  });
}

template <typename T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape) {
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  return make_node<T>("reshape", x.value().reshaped(std::move(shape)), {x.ptr()}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto n = g.size();
    for (std::int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
  });
}

template <typename T>
BasicVar<T> concat(const std::vector<BasicVar<T>>& xs, int axis) {
  if (xs.empty()) shape_error("concat", "no inputs");
  const Shape& first = xs[0].shape();
  const int ax = normalize_axis("concat", axis, static_cast<int>(first.size()));
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(ax)] = 0;
  std::vector<std::int64_t> dims;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != first[i]) shape_error("concat", first, s);
    }
    dims.push_back(s[static_cast<std::size_t>(ax)]);
    out_shape[static_cast<std::size_t>(ax)] += s[static_cast<std::size_t>(ax)];
  }
  const AxisSplit sp = split_axis(out_shape, ax);
  BasicArray<T> out(out_shape);
  std::int64_t offset = 0;
  std::vector<NodePtr<T>> parents;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto chunk = dims[k] * sp.inner;
    const T* src = xs[k].value().ptr();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, out.ptr() + o * sp.dim * sp.inner + offset);
    }
    offset += chunk;
    parents.push_back(xs[k].ptr());
  }
  return make_node<T>("concat", std::move(out), std::move(parents), [sp, dims](Node<T>& self) {
    std::int64_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const auto chunk = dims[k] * sp.inner;
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::int64_t o = 0; o < sp.outer; ++o) {
          const T* src = self.grad.ptr() + o * sp.dim * sp.inner + off;
          T* dst = g.ptr() + o * chunk;
          for (std::int64_t j = 0; j < chunk; ++j) dst[j] += src[j];
        }
      }
      off += chunk;
    }
  });
}

template <typename T>
BasicVar<T> slice(const BasicVar<T>& x, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis("slice", axis, x.value().rank());
  const AxisSplit sp = split_axis(x.shape(), ax);
  if (start < 0 || length <= 0 || start + length > sp.dim) {
    shape_error("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") out of bounds for shape " + to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  BasicArray<T> out(out_shape);
  const auto chunk = length * sp.inner;
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    const T* src = x.value().ptr() + o * sp.dim * sp.inner + start * sp.inner;
    std::copy(src, src + chunk, out.ptr() + o * chunk);
  }
  return make_node<T>("slice", std::move(out), {x.ptr()}, [sp, start, chunk](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      T* dst = g.ptr() + o * sp.dim * sp.inner + start * sp.inner;
      const T* src = self.grad.ptr() + o * chunk;
      for (std::int64_t j = 0; j < chunk; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
BasicVar<T> sum(const BasicVar<T>& x) {
  T s = 0;
  for (T v : x.value().data()) s += v;
  return make_node<T>("sum", BasicArray<T>::scalar(s), {x.ptr()}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    const T gy = self.grad[0];
    for (auto& v : g.data()) v += gy;
  });
}

template <typename T>
BasicVar<T> mean(const BasicVar<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
BasicVar<T> sum_axis(const BasicVar<T>& x, int axis) {
  const int ax = normalize_axis("sum_axis", axis, x.value().rank());
  const AxisSplit sp = split_axis(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + ax);
  BasicArray<T> out(out_shape);
  const T* src = x.value().ptr();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t d = 0; d < sp.dim; ++d) {
      for (std::int64_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += src[(o * sp.dim + d) * sp.inner + i];
    }
  }
  return make_node<T>("sum_axis", std::move(out), {x.ptr()}, [sp](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      for (std::int64_t d = 0; d < sp.dim; ++d) {
        for (std::int64_t i = 0; i < sp.inner; ++i) g[(o * sp.dim + d) * sp.inner + i] += self.grad[o * sp.inner + i];
      }
    }
  });
}

template <typename T>
BasicVar<T> mean_axis(const BasicVar<T>& x, int axis) {
  return scale(sum_axis(x, axis), T(1) / static_cast<T>(x.dim(axis)));
}

template <typename T>
BasicVar<T> layer_norm(const BasicVar<T>& x, const BasicVar<T>& gain, const BasicVar<T>& bias, T eps) {
  const auto d = x.dim(-1);
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) shape_error("layer_norm", x.shape(), gain.shape());
  const auto rows = x.size() / d;
  BasicArray<T> xhat(x.shape());
  std::vector<T> inv_std(static_cast<std::size_t>(rows));
  BasicArray<T> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.value().ptr() + r * d;
    T mu = 0;
    for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::int64_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (std::int64_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * is;
      out[r * d + j] = xhat[r * d + j] * gain.value()[j] + bias.value()[j];
    }
  }
  return make_node<T>("layer_norm", std::move(out), {x.ptr(), gain.ptr(), bias.ptr()},
                      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* gy = self.grad.ptr() + r * d;
      const T* xh = xhat.ptr() + r * d;
      if (pg.requires_grad) {
        auto& gg = pg.ensure_grad();
        for (std::int64_t j = 0; j < d; ++j) gg[j] += gy[j] * xh[j];
      }
      if (pb.requires_grad) {
        auto& gb = pb.ensure_grad();
        for (std::int64_t j = 0; j < d; ++j) gb[j] += gy[j];
      }
      if (px.requires_grad) {
        T m1 = 0, m2 = 0;
        for (std::int64_t j = 0; j < d; ++j) {
          const T gxh = gy[j] * pg.value[j];
          m1 += gxh;
          m2 += gxh * xh[j];
        }
        m1 /= static_cast<T>(d);
        m2 /= static_cast<T>(d);
        auto& gx = px.ensure_grad();
        const T is = inv_std[static_cast<std::size_t>(r)];
        for (std::int64_t j = 0; j < d; ++j) {
          gx[r * d + j] += is * (gy[j] * pg.value[j] - m1 - xh[j] * m2);
        }
      }
    }
  });
}

template <typename T>
BasicVar<T> gru_cell(const BasicVar<T>& x, const BasicVar<T>& h, const BasicVar<T>& wx, const BasicVar<T>& wh,
                     const BasicVar<T>& b) {
  const auto units = h.dim(1);
  if (wx.dim(1) != 3 * units || wh.shape() != Shape{units, 3 * units} || b.shape() != Shape{3 * units}) {
    shape_error("gru_cell", wh.shape(), Shape{units, 3 * units});
  }
  const auto gx = linear(x, wx, b);
  const auto gh = matmul(h, wh);
  const auto r = sigmoid(add(slice(gx, 1, 0, units), slice(gh, 1, 0, units)));
  const auto z = sigmoid(add(slice(gx, 1, units, units), slice(gh, 1, units, units)));
  const auto cand = tanh(add(slice(gx, 1, 2 * units, units), mul(r, slice(gh, 1, 2 * units, units))));
  return add(cand, mul(z, sub(h, cand)));
}

template <typename T>
BasicVar<T> straight_through_sample(const BasicVar<T>& logits, Rng& rng) {
  if (logits.value().rank() < 1) shape_error("straight_through_sample", "needs rank >= 1");
  if (!logits.value().all_finite()) throw NonFiniteError("straight_through_sample: non-finite logits");
  BasicArray<T> probs(logits.shape());
  softmax_rows(logits.value(), probs);
  const auto c = probs.dim(-1);
  const auto rows = probs.size() / c;
  BasicArray<T> out(logits.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double u = uniform01(rng);
    double acc = 0;
    std::int64_t pick = c - 1;
    for (std::int64_t j = 0; j < c; ++j) {
      acc += static_cast<double>(probs[r * c + j]);
      if (u < acc) {
        pick = j;
        break;
      }
    }
    out[r * c + pick] = T(1);
  }
  return make_node<T>("straight_through_sample", std::move(out), {logits.ptr()},
                      [probs = std::move(probs)](Node<T>& self) {
    softmax_backward_rows(probs, self.grad, self.parents[0]->ensure_grad());
  });
}

#define RECORE_INSTANTIATE_OPS(T)                                                                        \
  template BasicVar<T> add(const BasicVar<T>&, const BasicVar<T>&);                                      \
  template BasicVar<T> sub(const BasicVar<T>&, const BasicVar<T>&);                                      \
  template BasicVar<T> mul(const BasicVar<T>&, const BasicVar<T>&);                                      \
  template BasicVar<T> div(const BasicVar<T>&, const BasicVar<T>&);                                      \
  template BasicVar<T> scale(const BasicVar<T>&, T);                                                     \
  template BasicVar<T> add_scalar(const BasicVar<T>&, T);                                                \
  template BasicVar<T> matmul(const BasicVar<T>&, const BasicVar<T>&);                                   \
  template BasicVar<T> transpose(const BasicVar<T>&);                                                    \
  template BasicVar<T> linear(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&);               \
  template BasicVar<T> conv2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, int, int);     \
  template BasicVar<T> conv_transpose2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, int, \
                                        int, int);                                                       \
  template BasicVar<T> elu(const BasicVar<T>&);                                                          \
  template BasicVar<T> relu(const BasicVar<T>&);                                                         \
  template BasicVar<T> tanh(const BasicVar<T>&);                                                         \
  template BasicVar<T> sigmoid(const BasicVar<T>&);                                                      \
  template BasicVar<T> softplus(const BasicVar<T>&);                                                     \
  template BasicVar<T> exp(const BasicVar<T>&);                                                          \
  template BasicVar<T> log(const BasicVar<T>&);                                                          \
  template BasicVar<T> square(const BasicVar<T>&);                                                       \
  template BasicVar<T> clamp_min(const BasicVar<T>&, T);                                                 \
  template BasicVar<T> softmax(const BasicVar<T>&);                                                      \
  template BasicVar<T> log_softmax(const BasicVar<T>&);                                                  \
  template BasicVar<T> reshape(const BasicVar<T>&, Shape);                                               \
  template BasicVar<T> concat(const std::vector<BasicVar<T>>&, int);                                     \
  template BasicVar<T> slice(const BasicVar<T>&, int, std::int64_t, std::int64_t);                       \
  template BasicVar<T> sum(const BasicVar<T>&);                                                          \
  template BasicVar<T> mean(const BasicVar<T>&);                                                         \
  template BasicVar<T> sum_axis(const BasicVar<T>&, int);                                                \
  template BasicVar<T> mean_axis(const BasicVar<T>&, int);                                               \
  template BasicVar<T> layer_norm(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, T);        \
  template BasicVar<T> gru_cell(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&,              \
                                const BasicVar<T>&, const BasicVar<T>&);                                 \
  template BasicVar<T> straight_through_sample(const BasicVar<T>&, Rng&);

RECORE_INSTANTIATE_OPS(float)
RECORE_INSTANTIATE_OPS(double)

}  // namespace recore::ad
