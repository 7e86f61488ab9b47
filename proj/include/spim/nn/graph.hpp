#ifndef SPIM_NN_GRAPH_HPP
#define SPIM_NN_GRAPH_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spim/common.hpp"
#include "spim/rng.hpp"

namespace spim::nn {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape))
      throw invalid_input("tensor data length does not match shape");
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 1) throw invalid_input("tensor dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

/// Reverse-mode tape. Nodes are appended in topological order; backward walks
/// the tape once in reverse. Closures are only recorded on paths that need
/// gradients, so a no-grad forward pass (inference) stores nothing extra.
template <typename T>
class Graph {
 public:
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using ArrX = Eigen::Array<T, Eigen::Dynamic, 1>;

  int leaf(Tensor<T> t, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(t), {}, requires_grad, nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor<T>& value(int id) const { return nodes_.at(id).value; }

  const Tensor<T>& grad(int id) const {
    const Node& n = nodes_.at(id);
    if (!n.requires_grad) throw invalid_input("node does not track gradients");
    return n.grad;
  }

  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void assert_finite(int id, const std::string& what) const {
    for (T v : value(id).data)
      if (!std::isfinite(static_cast<double>(v)))
        throw numerical_error("non-finite value in " + what);
  }

  // -- elementwise ----------------------------------------------------------

  int add(int a, int b) {
    same_shape(a, b, "add");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    return record(std::move(out), {a, b}, [this, a, b](int self) {
      accumulate(a, nodes_[self].grad.data, T(1));
      accumulate(b, nodes_[self].grad.data, T(1));
    });
  }

  int sub(int a, int b) {
    same_shape(a, b, "sub");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
    return record(std::move(out), {a, b}, [this, a, b](int self) {
      accumulate(a, nodes_[self].grad.data, T(1));
      accumulate(b, nodes_[self].grad.data, T(-1));
    });
  }

  int mul(int a, int b) {
    same_shape(a, b, "mul");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
    return record(std::move(out), {a, b}, [this, a, b](int self) {
      const auto& g = nodes_[self].grad.data;
      if (nodes_[a].requires_grad) {
        auto& ga = ensure_grad(a);
        const auto& vb2 = nodes_[b].value.data;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
      }
      if (nodes_[b].requires_grad) {
        auto& gb = ensure_grad(b);
        const auto& va = nodes_[a].value.data;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
    });
  }

  int div(int a, int b) {
    same_shape(a, b, "div");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= vb.data[i];
    return record(std::move(out), {a, b}, [this, a, b](int self) {
      const auto& g = nodes_[self].grad.data;
      const auto& va = nodes_[a].value.data;
      const auto& vb2 = nodes_[b].value.data;
      if (nodes_[a].requires_grad) {
        auto& ga = ensure_grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb2[i];
      }
      if (nodes_[b].requires_grad) {
        auto& gb = ensure_grad(b);
        for (std::size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * va[i] / (vb2[i] * vb2[i]);
      }
    });
  }

  int add_scalar(int a, T s) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v += s;
    return record(std::move(out), {a}, [this, a](int self) {
      accumulate(a, nodes_[self].grad.data, T(1));
    });
  }

  int mul_scalar(int a, T s) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v *= s;
    return record(std::move(out), {a}, [this, a, s](int self) {
      accumulate(a, nodes_[self].grad.data, s);
    });
  }

  int abs(int a) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v = std::abs(v);
    return record(std::move(out), {a}, [this, a](int self) {
      const auto& g = nodes_[self].grad.data;
      const auto& va = nodes_[a].value.data;
      auto& ga = ensure_grad(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += va[i] > T(0) ? g[i] : (va[i] < T(0) ? -g[i] : T(0));
    });
  }

  int mean(int a) {
    const Tensor<T>& va = value(a);
    T acc = 0;
    for (T v : va.data) acc += v;
    Tensor<T> out({1});
    out.data[0] = acc / static_cast<T>(va.numel());
    return record(std::move(out), {a}, [this, a](int self) {
      const T g = nodes_[self].grad.data[0] / static_cast<T>(nodes_[a].value.numel());
      auto& ga = ensure_grad(a);
      for (T& v : ga) v += g;
    });
  }

  /// x * tanh(softplus(x)) with softplus(x) = max(x,0) + log1p(exp(-|x|)).
  /// Transcendentals are evaluated in owned (always 64-byte aligned) arrays:
  /// Eigen's packet exp/tanh differ from the scalar ones, and on unaligned
  /// maps the scalar/packet split would depend on where the heap put the
  /// tensor, making results run-to-run nondeterministic.
  int mish(int a) {
    const auto n = static_cast<Eigen::Index>(value(a).numel());
    Tensor<T> out(value(a).shape);
    ArrX x = Eigen::Map<const ArrX>(value(a).data.data(), n);
    x *= (x.max(T(0)) + (-x.abs()).exp().log1p()).tanh().eval();
    std::copy_n(x.data(), n, out.data.data());
    return record(std::move(out), {a}, [this, a, n](int self) {
      const ArrX x = Eigen::Map<const ArrX>(nodes_[a].value.data.data(), n);
      const ArrX t = (x.max(T(0)) + (-x.abs()).exp().log1p()).tanh();
      ArrX d = t + x * (T(1) - t.square()) / (T(1) + (-x).exp());
      const T* g = nodes_[self].grad.data.data();
      T* __restrict ga = ensure_grad(a).data();
      const T* __restrict dp = d.data();
      for (Eigen::Index i = 0; i < n; ++i) ga[i] += g[i] * dp[i];
    });
  }

  // -- layers ---------------------------------------------------------------

  /// w {out, in} row-major, x {in}, b {out} -> {out}
  int dense(int x, int w, int b) {
    const auto& sx = value(x).shape;
    const auto& sw = value(w).shape;
    const auto& sb = value(b).shape;
    if (sx.size() != 1 || sw.size() != 2 || sb.size() != 1 || sw[1] != sx[0] ||
        sw[0] != sb[0])
      throw invalid_input("dense shape mismatch");
    const int out_n = sw[0], in_n = sw[1];
    Tensor<T> out({out_n});
    Eigen::Map<const RowMat> wm(value(w).data.data(), out_n, in_n);
    Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> xv(value(x).data.data(), in_n);
    Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> ov(out.data.data(), out_n);
    ov.noalias() = wm * xv;
    for (int i = 0; i < out_n; ++i) out.data[i] += value(b).data[i];
    return record(std::move(out), {x, w, b}, [this, x, w, b, out_n, in_n](int self) {
      Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> g(nodes_[self].grad.data.data(),
                                                           out_n);
      if (nodes_[x].requires_grad) {
        Eigen::Map<const RowMat> wm(nodes_[w].value.data.data(), out_n, in_n);
        Eigen::Map<Eigen::Vector<T, Eigen::Dynamic>> gx(ensure_grad(x).data(), in_n);
        gx.noalias() += wm.transpose() * g;
      }
      if (nodes_[w].requires_grad) {
        Eigen::Map<const Eigen::Vector<T, Eigen::Dynamic>> xv(
            nodes_[x].value.data.data(), in_n);
        Eigen::Map<RowMat> gw(ensure_grad(w).data(), out_n, in_n);
        gw.noalias() += g * xv.transpose();
      }
      if (nodes_[b].requires_grad) {
        auto& gb = ensure_grad(b);
        for (int i = 0; i < out_n; ++i) gb[i] += g[i];
      }
    });
  }

  /// x {ic,h,w}, w {oc,ic,k,k} (k odd), optional b {oc}; zero padding,
  /// stride 1 or 2. Cross-correlation via im2col + GEMM; the patch matrix is
  /// row-major so every kernel tap fills it with contiguous row segments.
  int conv2d(int x, int w, int b, int stride, int pad) {
    const auto& sx = value(x).shape;
    const auto& sw = value(w).shape;
    if (sx.size() != 3 || sw.size() != 4 || sw[1] != sx[0])
      throw invalid_input("conv2d shape mismatch");
    if (sw[2] != sw[3] || sw[2] % 2 == 0) throw invalid_input("conv2d kernel must be odd square");
    if (stride != 1 && stride != 2) throw invalid_input("conv2d stride must be 1 or 2");
    const int ic = sx[0], h = sx[1], wdt = sx[2];
    const int oc = sw[0], k = sw[2];
    if (b >= 0 && (value(b).shape.size() != 1 || value(b).shape[0] != oc))
      throw invalid_input("conv2d bias shape mismatch");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (wdt + 2 * pad - k) / stride + 1;
    if (oh < 1 || ow < 1) throw invalid_input("conv2d output would be empty");

    auto col = std::make_shared<RowMat>(static_cast<Eigen::Index>(ic) * k * k,
                                        static_cast<Eigen::Index>(oh) * ow);
    im2col(value(x).data.data(), ic, h, wdt, k, stride, pad, oh, ow, *col);

    Tensor<T> out({oc, oh, ow});
    Eigen::Map<const RowMat> wm(value(w).data.data(), oc, ic * k * k);
    Eigen::Map<RowMat> om(out.data.data(), oc, oh * ow);
    om.noalias() = wm * *col;
    if (b >= 0) {
      const auto& bias = value(b).data;
      for (int o = 0; o < oc; ++o) {
        T* row = &out.data[static_cast<std::size_t>(o) * oh * ow];
        for (int i = 0; i < oh * ow; ++i) row[i] += bias[o];
      }
    }

    std::vector<int> parents = b >= 0 ? std::vector<int>{x, w, b} : std::vector<int>{x, w};
    const bool need = needs_grad(parents);
    if (!need) col.reset();  // inference: no backward storage
    return record(std::move(out), parents,
                  [this, x, w, b, col, ic, h, wdt, k, stride, pad, oh, ow, oc](int self) {
      Eigen::Map<const RowMat> g(nodes_[self].grad.data.data(), oc, oh * ow);
      if (nodes_[w].requires_grad) {
        Eigen::Map<RowMat> gw(ensure_grad(w).data(), oc, ic * k * k);
        gw.noalias() += g * col->transpose();
      }
      if (b >= 0 && nodes_[b].requires_grad) {
        auto& gb = ensure_grad(b);
        for (int o = 0; o < oc; ++o) {
          T acc = 0;
          const T* row = &nodes_[self].grad.data[static_cast<std::size_t>(o) * oh * ow];
          for (int i = 0; i < oh * ow; ++i) acc += row[i];
          gb[o] += acc;
        }
      }
      if (nodes_[x].requires_grad) {
        Eigen::Map<const RowMat> wm(nodes_[w].value.data.data(), oc, ic * k * k);
        RowMat gcol(static_cast<Eigen::Index>(ic) * k * k,
                    static_cast<Eigen::Index>(oh) * ow);
        gcol.noalias() = wm.transpose() * g;
        col2im_add(gcol, ic, h, wdt, k, stride, pad, oh, ow, ensure_grad(x).data());
      }
    });
  }

  int conv2d(int x, int w, int stride, int pad) { return conv2d(x, w, -1, stride, pad); }

  /// {c1,h,w} + {c2,h,w} -> {c1+c2,h,w}
  int concat_channels(int a, int b) {
    const auto& sa = value(a).shape;
    const auto& sb = value(b).shape;
    if (sa.size() != 3 || sb.size() != 3 || sa[1] != sb[1] || sa[2] != sb[2])
      throw invalid_input("concat shape mismatch");
    Tensor<T> out({sa[0] + sb[0], sa[1], sa[2]});
    std::copy(value(a).data.begin(), value(a).data.end(), out.data.begin());
    std::copy(value(b).data.begin(), value(b).data.end(),
              out.data.begin() + value(a).numel());
    return record(std::move(out), {a, b}, [this, a, b](int self) {
      const auto& g = nodes_[self].grad.data;
      const std::size_t na = nodes_[a].value.numel();
      if (nodes_[a].requires_grad) {
        auto& ga = ensure_grad(a);
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (nodes_[b].requires_grad) {
        auto& gb = ensure_grad(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
      }
    });
  }

  /// nearest-neighbour x2 in both spatial dimensions
  int upsample2x_nearest(int a) {
    const auto& sa = value(a).shape;
    if (sa.size() != 3) throw invalid_input("upsample expects {c,h,w}");
    const int c = sa[0], h = sa[1], wd = sa[2];
    Tensor<T> out({c, 2 * h, 2 * wd});
    const auto& va = value(a).data;
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < 2 * h; ++r)
        for (int cc = 0; cc < 2 * wd; ++cc)
          out.data[(static_cast<std::size_t>(ch) * 2 * h + r) * 2 * wd + cc] =
              va[(static_cast<std::size_t>(ch) * h + r / 2) * wd + cc / 2];
    return record(std::move(out), {a}, [this, a, c, h, wd](int self) {
      const auto& g = nodes_[self].grad.data;
      auto& ga = ensure_grad(a);
      for (int ch = 0; ch < c; ++ch)
        for (int r = 0; r < 2 * h; ++r)
          for (int cc = 0; cc < 2 * wd; ++cc)
            ga[(static_cast<std::size_t>(ch) * h + r / 2) * wd + cc / 2] +=
                g[(static_cast<std::size_t>(ch) * 2 * h + r) * 2 * wd + cc];
    });
  }

  /// same data, new shape (numel preserved)
  int reshape(int a, std::vector<int> shape) {
    if (Tensor<T>::numel_of(shape) != value(a).numel())
      throw invalid_input("reshape changes element count");
    Tensor<T> out(std::move(shape), value(a).data);
    return record(std::move(out), {a}, [this, a](int self) {
      accumulate(a, nodes_[self].grad.data, T(1));
    });
  }

  /// (x - mean) / (population_std + 1e-8) over the whole tensor
  int instance_standardize(int a) {
    const Tensor<T>& va = value(a);
    const std::size_t n = va.numel();
    if (n < 2) throw invalid_input("standardisation needs at least two values");
    T mean = 0;
    for (T v : va.data) mean += v;
    mean /= static_cast<T>(n);
    T var = 0;
    for (T v : va.data) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    const T sd = std::sqrt(var);
    const T denom = sd + T(1e-8);
    Tensor<T> out = va;
    for (T& v : out.data) v = (v - mean) / denom;
    return record(std::move(out), {a}, [this, a, mean, sd, denom, n](int self) {
      // y_i = u_i/d with u = x - mean, d = sd + 1e-8, sd = sqrt(mean(u^2))
      // dL/dx_j = (g_j - gbar)/d - u_j * sum(g_i u_i) / (n * sd * d^2)
      const auto& g = nodes_[self].grad.data;
      const auto& va2 = nodes_[a].value.data;
      auto& ga = ensure_grad(a);
      T gbar = 0, gu = 0;
      for (std::size_t i = 0; i < n; ++i) {
        gbar += g[i];
        gu += g[i] * (va2[i] - mean);
      }
      gbar /= static_cast<T>(n);
      const T s_term = sd > T(0) ? gu / (static_cast<T>(n) * sd * denom * denom) : T(0);
      for (std::size_t i = 0; i < n; ++i)
        ga[i] += (g[i] - gbar) / denom - (va2[i] - mean) * s_term;
    });
  }

  /// value = a + sigma * eps with eps drawn now; gradient passes through
  int add_noise(int a, Rng& rng, T sigma) {
    if (sigma < T(0)) throw invalid_input("noise sigma must be >= 0");
    Tensor<T> out = value(a);
    if (sigma > T(0))
      for (T& v : out.data) v += sigma * static_cast<T>(rng.gaussian());
    return record(std::move(out), {a}, [this, a](int self) {
      accumulate(a, nodes_[self].grad.data, T(1));
    });
  }

  /// (1/numel) * sum e^2 (e-1)^2  (the lambda weight is applied by callers)
  int binarisation_penalty(int a) {
    const Tensor<T>& va = value(a);
    T acc = 0;
    for (T e : va.data) acc += e * e * (e - T(1)) * (e - T(1));
    Tensor<T> out({1});
    out.data[0] = acc / static_cast<T>(va.numel());
    return record(std::move(out), {a}, [this, a](int self) {
      const T g = nodes_[self].grad.data[0] / static_cast<T>(nodes_[a].value.numel());
      const auto& va2 = nodes_[a].value.data;
      auto& ga = ensure_grad(a);
      for (std::size_t i = 0; i < va2.size(); ++i) {
        const T e = va2[i];
        ga[i] += g * T(2) * e * (e - T(1)) * (T(2) * e - T(1));
      }
    });
  }

  // -- backward -------------------------------------------------------------

  void backward(int id) {
    Node& top = nodes_.at(id);
    if (top.value.numel() != 1) throw invalid_input("backward needs a scalar node");
    if (!top.requires_grad) throw invalid_input("backward target tracks no gradient");
    top.grad = Tensor<T>({1});
    top.grad.data[0] = T(1);
    for (int i = id; i >= 0; --i)
      if (nodes_[i].backward && nodes_[i].requires_grad && !nodes_[i].grad.data.empty())
        nodes_[i].backward(i);
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(int)> backward;
  };

  std::vector<Node> nodes_;

  bool needs_grad(const std::vector<int>& parents) const {
    for (int p : parents)
      if (nodes_[p].requires_grad) return true;
    return false;
  }

  int record(Tensor<T> out, const std::vector<int>& parents,
             std::function<void(int)> back) {
    Node node;
    node.value = std::move(out);
    node.requires_grad = needs_grad(parents);
    if (node.requires_grad) node.backward = std::move(back);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<T>& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
    return n.grad.data;
  }

  void accumulate(int id, const std::vector<T>& g, T scale) {
    if (!nodes_[id].requires_grad) return;
    auto& dst = ensure_grad(id);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
  }

  void same_shape(int a, int b, const char* op) const {
    if (value(a).shape != value(b).shape)
      throw invalid_input(std::string(op) + ": shape mismatch");
  }

  static T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  static T mish_value(T x) { return x * std::tanh(softplus(x)); }

  /// Enumerate kernel taps (i, dr, dc) with the output-row range [r0, r1),
  /// output-column range [c0, c1) whose input positions ir = r*stride+dr-pad,
  /// ic = c*stride+dc-pad stay inside the plane, plus fr = pad-dr and the
  /// input column xc0 matching output column c0.
  template <typename Fn>
  static void for_each_tap(int ic, int h, int w, int k, int stride, int pad,
                           int oh, int ow, Fn&& fn) {
    for (int i = 0; i < ic; ++i)
      for (int dr = 0; dr < k; ++dr) {
        const int fr = pad - dr;
        if (h - 1 + fr < 0) continue;
        const int r0 = fr > 0 ? (fr + stride - 1) / stride : 0;
        const int r1 = std::min(oh, (h - 1 + fr) / stride + 1);
        if (r0 >= r1) continue;
        for (int dc = 0; dc < k; ++dc) {
          const int fc = pad - dc;
          if (w - 1 + fc < 0) continue;
          const int c0 = fc > 0 ? (fc + stride - 1) / stride : 0;
          const int c1 = std::min(ow, (w - 1 + fc) / stride + 1);
          if (c0 >= c1) continue;
          fn(i, dr, dc, r0, r1, c0, c1, fr, c0 * stride - fc);
        }
      }
  }

  static void im2col(const T* x, int ic, int h, int w, int k, int stride, int pad,
                     int oh, int ow, RowMat& col) {
    col.setZero();  // padding positions stay zero
    T* cp = col.data();
    for_each_tap(ic, h, w, k, stride, pad, oh, ow,
                 [&](int i, int dr, int dc, int r0, int r1, int c0, int c1,
                     int fr, int xc0) {
      const int rows = r1 - r0, len = c1 - c0;
      const std::size_t crow = (static_cast<std::size_t>(i) * k + dr) * k + dc;
      const T* sbase = x + (static_cast<std::size_t>(i) * h + r0 * stride - fr) * w + xc0;
      T* dbase = cp + (crow * oh + r0) * ow + c0;
      for (int r = 0; r < rows; ++r) {
        const T* __restrict src = sbase + static_cast<std::size_t>(r) * stride * w;
        T* __restrict dst = dbase + static_cast<std::size_t>(r) * ow;
        if (stride == 1)
          std::copy_n(src, len, dst);
        else
          for (int q = 0; q < len; ++q) dst[q] = src[q * stride];
      }
    });
  }

  static void col2im_add(const RowMat& col, int ic, int h, int w, int k, int stride,
                         int pad, int oh, int ow, T* gx) {
    const T* cp = col.data();
    for_each_tap(ic, h, w, k, stride, pad, oh, ow,
                 [&](int i, int dr, int dc, int r0, int r1, int c0, int c1,
                     int fr, int xc0) {
      const int rows = r1 - r0, len = c1 - c0;
      const std::size_t crow = (static_cast<std::size_t>(i) * k + dr) * k + dc;
      T* dbase = gx + (static_cast<std::size_t>(i) * h + r0 * stride - fr) * w + xc0;
      const T* sbase = cp + (crow * oh + r0) * ow + c0;
      for (int r = 0; r < rows; ++r) {
        const T* __restrict src = sbase + static_cast<std::size_t>(r) * ow;
        T* __restrict dst = dbase + static_cast<std::size_t>(r) * stride * w;
        if (stride == 1)
          for (int q = 0; q < len; ++q) dst[q] += src[q];
        else
          for (int q = 0; q < len; ++q) dst[q * stride] += src[q];
      }
    });
  }
};

} // namespace spim::nn

#endif // SPIM_NN_GRAPH_HPP
