#include "hicmd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hicmd/simd/kernels.hpp"

namespace hicmd::ops {
namespace {

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <class T>
void require_rank(const Var<T>& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    throw Error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
  }
}

template <class T>
Graph<T>& graph_of(std::initializer_list<Var<T>> vars) {
  Graph<T>* g = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) continue;
    if (g && v.graph != g) throw Error("variables from different graphs");
    g = v.graph;
  }
  if (!g) throw Error("operation on invalid variables");
  return *g;
}

struct ConvGeom {
  int n, ci, h, w, co, k, stride, pad, ho, wo;
  std::size_t patch() const { return static_cast<std::size_t>(ci) * k * k; }
  std::size_t pixels() const { return static_cast<std::size_t>(ho) * wo; }
};

// Output columns [lo, hi) whose input column ox * stride - pad + kx is inside
// the image.
inline std::pair<int, int> valid_cols(const ConvGeom& g, int kx) {
  const int off = kx - g.pad;
  int lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  int hi = (g.w - 1 - off) < 0 ? 0 : (g.w - 1 - off) / g.stride + 1;
  hi = std::min(hi, g.wo);
  lo = std::min(lo, hi);
  return {lo, hi};
}

template <class T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::size_t p = g.pixels();
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * p;
        const auto [lo, hi] = valid_cols(g, kx);
        const int off = kx - g.pad;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w + off;
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + hi, dst + g.wo, T(0));
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, T* dx) {
  const std::size_t p = g.pixels();
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.k + ky) * g.k + kx) * p;
        const auto [lo, hi] = valid_cols(g, kx);
        const int off = kx - g.pad;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.wo;
          T* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w + off;
          if (g.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
    }
  }
}

template <class T, class F, class D>
Var<T> unary(Var<T> x, F f, D df_from_xy) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  const int xid = x.id;
  return g.emit(std::move(y), {x}, [xid, df_from_xy](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& xv = gr.value(xid);
    auto& gx = gr.grad(xid);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * df_from_xy(xv[i]);
  });
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& g = graph_of<T>({a, b});
  require_same_shape(a, b, "add");
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const int ia = a.id, ib = b.id;
  return g.emit(std::move(y), {a, b}, [ia, ib](Graph<T>& gr, const Tensor<T>& gy) {
    for (int id : {ia, ib}) {
      if (!gr.needs_grad(id)) continue;
      auto& gx = gr.grad(id);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  auto& g = graph_of<T>({a, b});
  require_same_shape(a, b, "sub");
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ia = a.id, ib = b.id;
  return g.emit(std::move(y), {a, b}, [ia, ib](Graph<T>& gr, const Tensor<T>& gy) {
    if (gr.needs_grad(ia)) {
      auto& gx = gr.grad(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (gr.needs_grad(ib)) {
      auto& gx = gr.grad(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] -= gy[i];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  auto& g = graph_of<T>({a});
  Tensor<T> y = a.value();
  for (auto& v : y.values()) v *= s;
  const int ia = a.id;
  return g.emit(std::move(y), {a}, [ia, s](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += s * gy[i];
  });
}

template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& xs, const std::vector<T>& ws) {
  if (xs.empty() || xs.size() != ws.size()) throw Error("weighted_sum: need one weight per term");
  Graph<T>& g = *xs.front().graph;
  T total = 0;
  std::vector<int> ids;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].graph != &g) throw Error("weighted_sum: variables from different graphs");
    total += ws[i] * xs[i].value().item();
    ids.push_back(xs[i].id);
  }
  return g.emit(Tensor<T>::scalar(total), xs, [ids, ws](Graph<T>& gr, const Tensor<T>& gy) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (gr.needs_grad(ids[i])) gr.grad(ids[i])[0] += ws[i] * gy[0];
    }
  });
}

template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
  auto& g = graph_of<T>({x, w, b});
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3)) {
    throw Error("conv2d: weight " + shape_str(wv.shape()) + " incompatible with input " + shape_str(xv.shape()));
  }
  ConvGeom geo{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), wv.dim(2), stride, pad, 0, 0};
  geo.ho = (geo.h + 2 * pad - geo.k) / stride + 1;
  geo.wo = (geo.w + 2 * pad - geo.k) / stride + 1;
  if (geo.ho <= 0 || geo.wo <= 0) throw Error("conv2d: empty output for input " + shape_str(xv.shape()));
  if (b.valid() && (b.value().rank() != 1 || b.value().dim(0) != geo.co)) throw Error("conv2d: bias shape mismatch");

  const auto& kern = simd::kernels<T>();
  Tensor<T> y({geo.n, geo.co, geo.ho, geo.wo});
  std::vector<T> col(geo.patch() * geo.pixels());
  const std::size_t in_stride = static_cast<std::size_t>(geo.ci) * geo.h * geo.w;
  const std::size_t out_stride = static_cast<std::size_t>(geo.co) * geo.pixels();
  for (int n = 0; n < geo.n; ++n) {
    im2col(xv.data() + n * in_stride, geo, col.data());
    T* out = y.data() + n * out_stride;
    if (b.valid()) {
      for (int c = 0; c < geo.co; ++c) std::fill(out + c * geo.pixels(), out + (c + 1) * geo.pixels(), b.value()[c]);
    }
    kern.gemm_nn(geo.co, geo.pixels(), geo.patch(), wv.data(), col.data(), out);
  }

  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return g.emit(std::move(y), {x, w, b}, [geo, ix, iw, ib, in_stride, out_stride](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& kern = simd::kernels<T>();
    const auto& xv = gr.value(ix);
    const auto& wv = gr.value(iw);
    const bool need_x = gr.needs_grad(ix), need_w = gr.needs_grad(iw), need_b = ib >= 0 && gr.needs_grad(ib);
    std::vector<T> col(geo.patch() * geo.pixels());
    std::vector<T> dcol;
    if (need_x) dcol.resize(col.size());
    // Weight gradient accumulated transposed, (patch, co): the long patch
    // dimension becomes the GEMM row count.
    std::vector<T> dwt;
    if (need_w) dwt.assign(geo.patch() * geo.co, T(0));
    for (int n = 0; n < geo.n; ++n) {
      const T* dy = gy.data() + n * out_stride;
      if (need_w) {
        im2col(xv.data() + n * in_stride, geo, col.data());
        kern.gemm_nt(geo.patch(), geo.co, geo.pixels(), col.data(), dy, dwt.data());
      }
      if (need_b) {
        auto& gb = gr.grad(ib);
        for (int c = 0; c < geo.co; ++c) gb[c] += kern.sum(geo.pixels(), dy + c * geo.pixels());
      }
      if (need_x) {
        std::fill(dcol.begin(), dcol.end(), T(0));
        kern.gemm_tn(geo.patch(), geo.pixels(), geo.co, wv.data(), dy, dcol.data());
        col2im_add(dcol.data(), geo, gr.grad(ix).data() + n * in_stride);
      }
    }
    if (need_w) {
      auto& gw = gr.grad(iw);
      const std::size_t patch = geo.patch();
      for (int o = 0; o < geo.co; ++o)
        for (std::size_t q = 0; q < patch; ++q) gw[o * patch + q] += dwt[q * geo.co + o];
    }
  });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  auto& g = graph_of<T>({x, w, b});
  require_rank(x, 2, "linear input");
  require_rank(w, 2, "linear weight");
  const auto& xv = x.value();
  const auto& wv = w.value();
  const int n = xv.dim(0), d = xv.dim(1), o = wv.dim(0);
  if (wv.dim(1) != d) throw Error("linear: weight " + shape_str(wv.shape()) + " vs input " + shape_str(xv.shape()));
  if (b.valid() && (b.value().rank() != 1 || b.value().dim(0) != o)) throw Error("linear: bias shape mismatch");
  Tensor<T> y({n, o});
  if (b.valid()) {
    for (int r = 0; r < n; ++r) std::copy(b.value().data(), b.value().data() + o, y.data() + r * o);
  }
  simd::kernels<T>().gemm_nt(n, o, d, xv.data(), wv.data(), y.data());
  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  return g.emit(std::move(y), {x, w, b}, [n, d, o, ix, iw, ib](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& kern = simd::kernels<T>();
    if (gr.needs_grad(iw)) kern.gemm_tn(o, d, n, gy.data(), gr.value(ix).data(), gr.grad(iw).data());
    if (gr.needs_grad(ix)) kern.gemm_nn(n, d, o, gy.data(), gr.value(iw).data(), gr.grad(ix).data());
    if (ib >= 0 && gr.needs_grad(ib)) {
      auto& gb = gr.grad(ib);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < o; ++c) gb[c] += gy[static_cast<std::size_t>(r) * o + c];
    }
  });
}

template <class T>
Var<T> relu(Var<T> x) {
  return unary<T>(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(Var<T> x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > T(0) ? v : slope * v; }, [slope](T v) { return v > T(0) ? T(1) : slope; });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); },
      [](T v) {
        const T t = std::tanh(v);
        return T(1) - t * t;
      });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
  auto sig = [](T v) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); };
  return unary<T>(x, sig, [sig](T v) {
    const T s = sig(v);
    return s * (T(1) - s);
  });
}

template <class T>
Var<T> instance_norm(Var<T> x, T eps) {
  auto& g = graph_of<T>({x});
  require_rank(x, 4, "instance_norm");
  const auto& xv = x.value();
  const std::size_t planes = static_cast<std::size_t>(xv.dim(0)) * xv.dim(1);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor<T> y(xv.shape());
  std::vector<T> inv_std(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * hw;
    T mean = 0;
    for (std::size_t i = 0; i < hw; ++i) mean += src[i];
    mean /= static_cast<T>(hw);
    T var = 0;
    for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<T>(hw);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[p] = is;
    T* dst = y.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - mean) * is;
  }
  const int ix = x.id;
  // Backward reads the normalized output from the tape instead of a copy.
  const int iy = g.next_id();
  return g.emit(std::move(y), {x}, [ix, iy, planes, hw, inv_std](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& yv = gr.value(iy);
    auto& gx = gr.grad(ix);
    const T inv_n = T(1) / static_cast<T>(hw);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* dy = gy.data() + p * hw;
      const T* yy = yv.data() + p * hw;
      T mean_dy = 0, mean_dyy = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        mean_dy += dy[i];
        mean_dyy += dy[i] * yy[i];
      }
      mean_dy *= inv_n;
      mean_dyy *= inv_n;
      T* dst = gx.data() + p * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] += inv_std[p] * (dy[i] - mean_dy - yy[i] * mean_dyy);
    }
  });
}

template <class T>
Var<T> modulate(Var<T> x, Var<T> gamma, Var<T> beta) {
  auto& g = graph_of<T>({x, gamma, beta});
  require_rank(x, 4, "modulate");
  const auto& xv = x.value();
  const Shape want{xv.dim(0), xv.dim(1)};
  if (gamma.shape() != want || beta.shape() != want) {
    throw Error("modulate: expected gamma/beta " + shape_str(want) + ", got " + shape_str(gamma.shape()) + " / " +
                shape_str(beta.shape()));
  }
  const std::size_t planes = numel(want);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor<T> y(xv.shape());
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t p = 0; p < planes; ++p) {
    const T s = T(1) + gv[p], o = bv[p];
    const T* src = xv.data() + p * hw;
    T* dst = y.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * s + o;
  }
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  return g.emit(std::move(y), {x, gamma, beta}, [ix, ig, ib, planes, hw](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& xv = gr.value(ix);
    const auto& gv = gr.value(ig);
    const bool nx = gr.needs_grad(ix), ng = gr.needs_grad(ig), nb = gr.needs_grad(ib);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* dy = gy.data() + p * hw;
      const T* src = xv.data() + p * hw;
      if (nx) {
        T* dx = gr.grad(ix).data() + p * hw;
        const T s = T(1) + gv[p];
        for (std::size_t i = 0; i < hw; ++i) dx[i] += dy[i] * s;
      }
      if (ng) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += dy[i] * src[i];
        gr.grad(ig)[p] += acc;
      }
      if (nb) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += dy[i];
        gr.grad(ib)[p] += acc;
      }
    }
  });
}

template <class T>
Var<T> upsample2x(Var<T> x) {
  auto& g = graph_of<T>({x});
  require_rank(x, 4, "upsample2x");
  const auto& xv = x.value();
  const int planes = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor<T> y({xv.dim(0), xv.dim(1), 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    const T* src = xv.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = y.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int r = 0; r < 2 * h; ++r)
      for (int c = 0; c < 2 * w; ++c) dst[r * 2 * w + c] = src[(r / 2) * w + c / 2];
  }
  const int ix = x.id;
  return g.emit(std::move(y), {x}, [ix, planes, h, w](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ix);
    for (int p = 0; p < planes; ++p) {
      const T* dy = gy.data() + static_cast<std::size_t>(p) * 4 * h * w;
      T* dx = gx.data() + static_cast<std::size_t>(p) * h * w;
      for (int r = 0; r < 2 * h; ++r)
        for (int c = 0; c < 2 * w; ++c) dx[(r / 2) * w + c / 2] += dy[r * 2 * w + c];
    }
  });
}

template <class T>
Var<T> global_avg_pool(Var<T> x) {
  auto& g = graph_of<T>({x});
  require_rank(x, 4, "global_avg_pool");
  const auto& xv = x.value();
  const std::size_t planes = static_cast<std::size_t>(xv.dim(0)) * xv.dim(1);
  const std::size_t hw = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor<T> y({xv.dim(0), xv.dim(1)});
  const auto& kern = simd::kernels<T>();
  for (std::size_t p = 0; p < planes; ++p) y[p] = kern.sum(hw, xv.data() + p * hw) / static_cast<T>(hw);
  const int ix = x.id;
  return g.emit(std::move(y), {x}, [ix, planes, hw](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ix);
    for (std::size_t p = 0; p < planes; ++p) {
      const T v = gy[p] / static_cast<T>(hw);
      T* dx = gx.data() + p * hw;
      for (std::size_t i = 0; i < hw; ++i) dx[i] += v;
    }
  });
}

template <class T>
Var<T> flatten(Var<T> x) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  if (xv.rank() < 1) throw Error("flatten: expected a batch");
  Tensor<T> y = xv.reshaped({xv.dim(0), static_cast<int>(xv.row_size())});
  const int ix = x.id;
  return g.emit(std::move(y), {x}, [ix](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ix);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw Error("concat_cols: no inputs");
  Graph<T>& g = *xs.front().graph;
  const int n = xs.front().value().dim(0);
  std::vector<int> widths, ids;
  int total = 0;
  for (const auto& v : xs) {
    require_rank(v, 2, "concat_cols");
    if (v.graph != &g || v.value().dim(0) != n) throw Error("concat_cols: row count or graph mismatch");
    widths.push_back(v.value().dim(1));
    ids.push_back(v.id);
    total += v.value().dim(1);
  }
  Tensor<T> y({n, total});
  int off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].value();
    for (int r = 0; r < n; ++r)
      std::copy(v.data() + r * widths[k], v.data() + (r + 1) * widths[k], y.data() + r * total + off);
    off += widths[k];
  }
  return g.emit(std::move(y), xs, [ids, widths, n, total](Graph<T>& gr, const Tensor<T>& gy) {
    int off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.needs_grad(ids[k])) {
        auto& gx = gr.grad(ids[k]);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < widths[k]; ++c) gx[r * widths[k] + c] += gy[r * total + off + c];
      }
      off += widths[k];
    }
  });
}

template <class T>
Var<T> slice_cols(Var<T> x, int begin, int end) {
  auto& g = graph_of<T>({x});
  require_rank(x, 2, "slice_cols");
  const int n = x.value().dim(0), d = x.value().dim(1);
  if (begin < 0 || end > d || begin >= end) {
    throw Error("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for width " +
                std::to_string(d));
  }
  const int wdt = end - begin;
  Tensor<T> y({n, wdt});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < wdt; ++c) y[r * wdt + c] = x.value()[r * d + begin + c];
  const int ix = x.id;
  return g.emit(std::move(y), {x}, [ix, n, d, wdt, begin](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ix);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < wdt; ++c) gx[r * d + begin + c] += gy[r * wdt + c];
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw Error("concat_rows: no inputs");
  Graph<T>& g = *xs.front().graph;
  Shape tail(xs.front().shape().begin() + 1, xs.front().shape().end());
  int rows = 0;
  std::vector<int> ids;
  std::vector<std::size_t> sizes;
  for (const auto& v : xs) {
    if (v.graph != &g) throw Error("concat_rows: variables from different graphs");
    Shape t(v.shape().begin() + 1, v.shape().end());
    if (t != tail) throw Error("concat_rows: trailing shape mismatch " + shape_str(v.shape()));
    rows += v.value().dim(0);
    ids.push_back(v.id);
    sizes.push_back(v.value().size());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor<T> y(shape);
  std::size_t off = 0;
  for (const auto& v : xs) {
    std::copy(v.value().data(), v.value().data() + v.value().size(), y.data() + off);
    off += v.value().size();
  }
  return g.emit(std::move(y), xs, [ids, sizes](Graph<T>& gr, const Tensor<T>& gy) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.needs_grad(ids[k])) {
        auto& gx = gr.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gx[i] += gy[off + i];
      }
      off += sizes[k];
    }
  });
}

template <class T>
Var<T> gather_rows(Var<T> x, const std::vector<int>& rows) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  const std::size_t rs = xv.row_size();
  Shape shape = xv.shape();
  shape[0] = static_cast<int>(rows.size());
  Tensor<T> y(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= xv.dim(0)) throw Error("gather_rows: row index out of range");
    std::copy(xv.data() + rows[r] * rs, xv.data() + (rows[r] + 1) * rs, y.data() + r * rs);
  }
  const int ix = x.id;
  return g.emit(std::move(y), {x}, [ix, rows, rs](Graph<T>& gr, const Tensor<T>& gy) {
    auto& gx = gr.grad(ix);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t i = 0; i < rs; ++i) gx[rows[r] * rs + i] += gy[r * rs + i];
  });
}

template <class T>
Var<T> weighted_concat(Var<T> a, Var<T> b, Var<T> alpha) {
  auto& g = graph_of<T>({a, b, alpha});
  require_rank(a, 2, "weighted_concat");
  require_rank(b, 2, "weighted_concat");
  if (a.value().dim(0) != b.value().dim(0)) throw Error("weighted_concat: row count mismatch");
  if (alpha.value().size() != 1) throw Error("weighted_concat: alpha must be a scalar");
  const T al = alpha.value()[0];
  const int n = a.value().dim(0), da = a.value().dim(1), db = b.value().dim(1), d = da + db;
  Tensor<T> y({n, d});
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < da; ++c) y[r * d + c] = al * a.value()[r * da + c];
    for (int c = 0; c < db; ++c) y[r * d + da + c] = (T(1) - al) * b.value()[r * db + c];
  }
  const int ia = a.id, ib = b.id, il = alpha.id;
  return g.emit(std::move(y), {a, b, alpha}, [ia, ib, il, n, da, db, d](Graph<T>& gr, const Tensor<T>& gy) {
    const T al = gr.value(il)[0];
    if (gr.needs_grad(ia)) {
      auto& gx = gr.grad(ia);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < da; ++c) gx[r * da + c] += al * gy[r * d + c];
    }
    if (gr.needs_grad(ib)) {
      auto& gx = gr.grad(ib);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < db; ++c) gx[r * db + c] += (T(1) - al) * gy[r * d + da + c];
    }
    if (gr.needs_grad(il)) {
      const auto& av = gr.value(ia);
      const auto& bv = gr.value(ib);
      T acc = 0;
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < da; ++c) acc += gy[r * d + c] * av[r * da + c];
        for (int c = 0; c < db; ++c) acc -= gy[r * d + da + c] * bv[r * db + c];
      }
      gr.grad(il)[0] += acc;
    }
  });
}

template <class T>
Var<T> mean_abs_diff(Var<T> a, Var<T> b) {
  auto& g = graph_of<T>({a, b});
  require_same_shape(a, b, "mean_abs_diff");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() == 0) throw Error("mean_abs_diff: empty tensors");
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const T inv_n = T(1) / static_cast<T>(av.size());
  const int ia = a.id, ib = b.id;
  return g.emit(Tensor<T>::scalar(acc * inv_n), {a, b}, [ia, ib, inv_n](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& av = gr.value(ia);
    const auto& bv = gr.value(ib);
    const T s = gy[0] * inv_n;
    const bool na = gr.needs_grad(ia), nb = gr.needs_grad(ib);
    T* ga = na ? gr.grad(ia).data() : nullptr;
    T* gb = nb ? gr.grad(ib).data() : nullptr;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T diff = av[i] - bv[i];
      const T sg = diff > T(0) ? s : (diff < T(0) ? -s : T(0));
      if (na) ga[i] += sg;
      if (nb) gb[i] -= sg;
    }
  });
}

template <class T>
Var<T> half_sq_norm_mean(Var<T> x) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  const int rows = xv.rank() == 0 ? 1 : xv.dim(0);
  if (rows == 0) throw Error("half_sq_norm_mean: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
  const T inv = T(1) / static_cast<T>(rows);
  const int ix = x.id;
  return g.emit(Tensor<T>::scalar(T(0.5) * acc * inv), {x}, [ix, inv](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& xv = gr.value(ix);
    auto& gx = gr.grad(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[0] * inv * xv[i];
  });
}

template <class T>
Var<T> mean_log(Var<T> x, T eps) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += std::log(std::clamp(xv[i], eps, T(1) - eps));
  const T inv = T(1) / static_cast<T>(xv.size());
  const int ix = x.id;
  return g.emit(Tensor<T>::scalar(acc * inv), {x}, [ix, inv, eps](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& xv = gr.value(ix);
    auto& gx = gr.grad(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > eps && xv[i] < T(1) - eps) gx[i] += gy[0] * inv / xv[i];
    }
  });
}

template <class T>
Var<T> mean_log1m(Var<T> x, T eps) {
  auto& g = graph_of<T>({x});
  const auto& xv = x.value();
  T acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += std::log(T(1) - std::clamp(xv[i], eps, T(1) - eps));
  const T inv = T(1) / static_cast<T>(xv.size());
  const int ix = x.id;
  return g.emit(Tensor<T>::scalar(acc * inv), {x}, [ix, inv, eps](Graph<T>& gr, const Tensor<T>& gy) {
    const auto& xv = gr.value(ix);
    auto& gx = gr.grad(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > eps && xv[i] < T(1) - eps) gx[i] -= gy[0] * inv / (T(1) - xv[i]);
    }
  });
}

template <class T>
Var<T> cross_entropy(Var<T> logits, const std::vector<int>& labels) {
  auto& g = graph_of<T>({logits});
  require_rank(logits, 2, "cross_entropy");
  const auto& lv = logits.value();
  const int m = lv.dim(0), k = lv.dim(1);
  if (static_cast<int>(labels.size()) != m) throw Error("cross_entropy: one label per row required");
  Tensor<T> probs(lv.shape());
  T loss = 0;
  for (int r = 0; r < m; ++r) {
    if (labels[r] < 0 || labels[r] >= k) {
      throw Error("cross_entropy: label " + std::to_string(labels[r] + 1) + " outside 1.." + std::to_string(k));
    }
    const T* row = lv.data() + r * k;
    const T mx = *std::max_element(row, row + k);
    T z = 0;
    for (int c = 0; c < k; ++c) z += std::exp(row[c] - mx);
    for (int c = 0; c < k; ++c) probs[r * k + c] = std::exp(row[c] - mx) / z;
    loss += std::log(z) + mx - row[labels[r]];
  }
  const T inv = T(1) / static_cast<T>(m);
  const int il = logits.id;
  return g.emit(Tensor<T>::scalar(loss * inv), {logits},
                [il, probs = std::move(probs), labels, m, k, inv](Graph<T>& gr, const Tensor<T>& gy) {
                  auto& gx = gr.grad(il);
                  const T s = gy[0] * inv;
                  for (int r = 0; r < m; ++r) {
                    for (int c = 0; c < k; ++c) gx[r * k + c] += s * (probs[r * k + c] - (c == labels[r] ? T(1) : T(0)));
                  }
                });
}

template <class T>
Var<T> triplet_batch_hard(Var<T> features, const std::vector<int>& labels, T margin) {
  auto& g = graph_of<T>({features});
  require_rank(features, 2, "triplet_batch_hard");
  const auto& fv = features.value();
  const int m = fv.dim(0), d = fv.dim(1);
  if (static_cast<int>(labels.size()) != m) throw Error("triplet_batch_hard: one label per feature required");
  std::vector<T> dist(static_cast<std::size_t>(m) * m, T(0));
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      T s = 0;
      for (int c = 0; c < d; ++c) {
        const T diff = fv[i * d + c] - fv[j * d + c];
        s += diff * diff;
      }
      dist[i * m + j] = dist[j * m + i] = std::sqrt(s);
    }
  }
  // Hardest positive: farthest same-label sample (the anchor itself when it has
  // no partner). Hardest negative: nearest other-label sample. Ties keep the
  // lowest index.
  std::vector<int> pos(m), neg(m);
  T loss = 0;
  std::vector<char> active(m, 0);
  for (int a = 0; a < m; ++a) {
    int p = a, n = -1;
    for (int j = 0; j < m; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (p == a || dist[a * m + j] > dist[a * m + p]) p = j;
      } else if (n < 0 || dist[a * m + j] < dist[a * m + n]) {
        n = j;
      }
    }
    if (n < 0) throw Error("triplet_batch_hard: batch holds a single identity, no negative exists");
    pos[a] = p;
    neg[a] = n;
    const T term = dist[a * m + p] - dist[a * m + n] + margin;
    if (term > T(0)) {
      loss += term;
      active[a] = 1;
    }
  }
  const T inv = T(1) / static_cast<T>(m);
  const int iff = features.id;
  return g.emit(Tensor<T>::scalar(loss * inv), {features},
                [iff, m, d, inv, pos, neg, active, dist = std::move(dist)](Graph<T>& gr, const Tensor<T>& gy) {
                  const auto& fv = gr.value(iff);
                  auto& gx = gr.grad(iff);
                  const T s = gy[0] * inv;
                  auto push = [&](int a, int b, T sign) {
                    const T dd = dist[a * m + b];
                    if (a == b || dd <= T(0)) return;
                    for (int c = 0; c < d; ++c) {
                      const T u = sign * s * (fv[a * d + c] - fv[b * d + c]) / dd;
                      gx[a * d + c] += u;
                      gx[b * d + c] -= u;
                    }
                  };
                  for (int a = 0; a < m; ++a) {
                    if (!active[a]) continue;
                    push(a, pos[a], T(1));
                    push(a, neg[a], T(-1));
                  }
                });
}

template <class T>
Var<T> detach(Var<T> x) {
  return x.graph->constant(x.value());
}

#define HICMD_INSTANTIATE_OPS(T)                                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                           \
  template Var<T> sub(Var<T>, Var<T>);                                                           \
  template Var<T> scale(Var<T>, T);                                                              \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);               \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                                      \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                                \
  template Var<T> relu(Var<T>);                                                                  \
  template Var<T> leaky_relu(Var<T>, T);                                                         \
  template Var<T> tanh(Var<T>);                                                                  \
  template Var<T> sigmoid(Var<T>);                                                               \
  template Var<T> instance_norm(Var<T>, T);                                                      \
  template Var<T> modulate(Var<T>, Var<T>, Var<T>);                                              \
  template Var<T> upsample2x(Var<T>);                                                            \
  template Var<T> global_avg_pool(Var<T>);                                                       \
  template Var<T> flatten(Var<T>);                                                               \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                       \
  template Var<T> slice_cols(Var<T>, int, int);                                                  \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                       \
  template Var<T> gather_rows(Var<T>, const std::vector<int>&);                                  \
  template Var<T> weighted_concat(Var<T>, Var<T>, Var<T>);                                       \
  template Var<T> mean_abs_diff(Var<T>, Var<T>);                                                 \
  template Var<T> half_sq_norm_mean(Var<T>);                                                     \
  template Var<T> mean_log(Var<T>, T);                                                           \
  template Var<T> mean_log1m(Var<T>, T);                                                         \
  template Var<T> cross_entropy(Var<T>, const std::vector<int>&);                                \
  template Var<T> triplet_batch_hard(Var<T>, const std::vector<int>&, T);                        \
  template Var<T> detach(Var<T>);

HICMD_INSTANTIATE_OPS(float)
HICMD_INSTANTIATE_OPS(double)

}  // namespace hicmd::ops
