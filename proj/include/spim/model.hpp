#ifndef SPIM_MODEL_HPP
#define SPIM_MODEL_HPP

#include <cmath>
#include <string>
#include <vector>

#include "spim/common.hpp"
#include "spim/nn/graph.hpp"
#include "spim/rng.hpp"

namespace spim {

/// Decoder shape: dense m -> n, reshape to side x side, then a U-Net with
/// `unet_levels` stride-2 downsamples and a 1x1 output head.
struct ArchitectureConfig {
  int m = 0;
  int side = 0;
  int unet_levels = 0;  // 0 = derive from side
  int base_channels = 32;
  int kernel = 3;

  static int default_levels(int side) {
    int k = 0;
    while ((1 << (k + 1)) <= side) ++k;  // k = floor(log2 side)
    return std::clamp(k - 3, 1, 4);      // 64 -> 3, 128 -> 4
  }

  void validate() {
    if (side < 2) throw invalid_input("image side must be >= 2");
    if (m < 1 || m > side * side) throw invalid_input("need 1 <= m <= side^2");
    if (kernel != 3) throw invalid_input("the decoder uses 3x3 kernels");
    if (base_channels < 1) throw invalid_input("base channels must be >= 1");
    if (unet_levels == 0) unet_levels = default_levels(side);
    if (unet_levels < 1) throw invalid_input("unet levels must be >= 1");
    if (side % (1 << unet_levels) != 0)
      throw invalid_input("side must be divisible by 2^levels");
  }
};

/// Named decoder parameters in graph construction order.
template <typename T>
struct DecoderParams {
  std::vector<std::string> names;
  std::vector<nn::Tensor<T>> tensors;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw invalid_input("unknown parameter name: " + name);
  }

  template <typename U>
  DecoderParams<U> cast() const {
    DecoderParams<U> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

namespace detail {

template <typename T>
void push_conv(DecoderParams<T>& p, const std::string& name, int oc, int ic, int k,
               Rng& rng) {
  nn::Tensor<T> w({oc, ic, k, k});
  const double stddev = std::sqrt(2.0 / (static_cast<double>(ic) * k * k));
  for (T& v : w.data) v = static_cast<T>(rng.gaussian(0.0, stddev));
  p.names.push_back(name + ".w");
  p.tensors.push_back(std::move(w));
  p.names.push_back(name + ".b");
  p.tensors.push_back(nn::Tensor<T>({oc}));
}

} // namespace detail

/// Seed-deterministic parameter set (He-style normal init, zero biases,
/// zero 1x1 head).
template <typename T>
DecoderParams<T> init_decoder_params(ArchitectureConfig arch, std::uint64_t seed) {
  arch.validate();
  const int n = arch.side * arch.side;
  Rng rng(seed, 10);
  DecoderParams<T> p;

  nn::Tensor<T> dw({n, arch.m});
  const double ds = std::sqrt(1.0 / arch.m);
  for (T& v : dw.data) v = static_cast<T>(rng.gaussian(0.0, ds));
  p.names.push_back("dense.w");
  p.tensors.push_back(std::move(dw));
  p.names.push_back("dense.b");
  p.tensors.push_back(nn::Tensor<T>({n}));

  const int k = arch.kernel;
  detail::push_conv(p, "stem1", arch.base_channels, 1, k, rng);
  detail::push_conv(p, "stem2", arch.base_channels, arch.base_channels, k, rng);
  for (int l = 1; l <= arch.unet_levels; ++l) {
    const int cin = arch.base_channels << (l - 1);
    detail::push_conv(p, "down" + std::to_string(l) + "a", 2 * cin, cin, k, rng);
    detail::push_conv(p, "down" + std::to_string(l) + "b", 2 * cin, 2 * cin, k, rng);
  }
  for (int l = arch.unet_levels; l >= 1; --l) {
    const int cout = arch.base_channels << (l - 1);
    detail::push_conv(p, "up" + std::to_string(l) + "a", cout, 2 * cout, k, rng);
    detail::push_conv(p, "up" + std::to_string(l) + "b", cout, 2 * cout, k, rng);
  }
  detail::push_conv(p, "head", 1, arch.base_channels, 1, rng);
  // zero head: with the global residual the decoder starts as the plain
  // linear back-projection and the U-Net correction fades in
  auto& head_w = p.tensors[p.index_of("head.w")];
  std::fill(head_w.data.begin(), head_w.data.end(), T(0));
  return p;
}

/// Builds the decoder forward pass. `param_ids` are graph leaves in the order
/// of init_decoder_params; `y_node` is the (already standardised, possibly
/// noisy) measurement vector {m}. Returns the raw output node {1, side, side}.
template <typename T>
int decoder_forward(nn::Graph<T>& g, const std::vector<int>& param_ids,
                    const ArchitectureConfig& arch, int y_node) {
  int next = 0;
  auto take = [&]() { return param_ids.at(next++); };

  const int dw = take(), db = take();
  int x = g.dense(y_node, dw, db);
  x = g.reshape(x, {1, arch.side, arch.side});
  const int backproj = x;  // global residual: the U-Net learns the correction

  auto conv_mish = [&](int in, int stride) {
    const int w = take(), b = take();
    return g.mish(g.conv2d(in, w, b, stride, arch.kernel / 2));
  };

  x = conv_mish(x, 1);
  x = conv_mish(x, 1);
  std::vector<int> skips{x};
  for (int l = 1; l <= arch.unet_levels; ++l) {
    x = conv_mish(x, 2);
    x = conv_mish(x, 1);
    if (l < arch.unet_levels) skips.push_back(x);
  }
  for (int l = arch.unet_levels; l >= 1; --l) {
    x = g.upsample2x_nearest(x);
    x = conv_mish(x, 1);
    x = g.concat_channels(x, skips[l - 1]);
    x = conv_mish(x, 1);
  }
  const int hw = take(), hb = take();
  x = g.conv2d(x, hw, hb, 1, 0);  // 1x1 head, no activation
  x = g.add(x, backproj);
  if (next != static_cast<int>(param_ids.size()))
    throw invalid_input("parameter list does not match architecture");
  return x;
}

/// Mean absolute error between two same-shape nodes.
template <typename T>
int l1_loss(nn::Graph<T>& g, int target, int output) {
  return g.mean(g.abs(g.sub(target, output)));
}

namespace detail {

template <typename T>
std::vector<T> gaussian_window_11() {
  std::vector<T> w(11);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    const double v = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    w[i] = static_cast<T>(v);
    sum += v;
  }
  for (T& v : w) v = static_cast<T>(static_cast<double>(v) / sum);
  return w;
}

} // namespace detail

/// 1 - mean SSIM over valid 11x11 windows; same constants as the metric
/// (C1 = 1e-4, C2 = 9e-4). Inputs are {1, s, s} nodes with s >= 11.
template <typename T>
int ssim_loss(nn::Graph<T>& g, int target, int output) {
  const auto& s = g.value(target).shape;
  if (s != g.value(output).shape) throw invalid_input("ssim loss: shape mismatch");
  if (s.size() != 3 || s[0] != 1 || s[1] < 11 || s[2] < 11)
    throw invalid_input("ssim loss needs {1, s, s} with s >= 11");

  const std::vector<T> w1 = detail::gaussian_window_11<T>();
  nn::Tensor<T> kernel({1, 1, 11, 11});
  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 11; ++c) kernel.data[r * 11 + c] = w1[r] * w1[c];
  const int kw = g.leaf(std::move(kernel), false);

  auto window_mean = [&](int img) { return g.conv2d(img, kw, 1, 0); };
  const T c1 = T(1e-4), c2 = T(9e-4);

  const int mu_x = window_mean(target);
  const int mu_y = window_mean(output);
  const int mu_xx = g.mul(mu_x, mu_x);
  const int mu_yy = g.mul(mu_y, mu_y);
  const int mu_xy = g.mul(mu_x, mu_y);
  const int var_x = g.sub(window_mean(g.mul(target, target)), mu_xx);
  const int var_y = g.sub(window_mean(g.mul(output, output)), mu_yy);
  const int cov = g.sub(window_mean(g.mul(target, output)), mu_xy);

  const int num = g.mul(g.add_scalar(g.mul_scalar(mu_xy, T(2)), c1),
                        g.add_scalar(g.mul_scalar(cov, T(2)), c2));
  const int den = g.mul(g.add_scalar(g.add(mu_xx, mu_yy), c1),
                        g.add_scalar(g.add(var_x, var_y), c2));
  const int ssim_mean = g.mean(g.div(num, den));
  return g.add_scalar(g.mul_scalar(ssim_mean, T(-1)), T(1));
}

/// w1 * L1 + w2 * (1 - SSIM); the binarisation term is added by the trainer.
template <typename T>
int data_loss(nn::Graph<T>& g, int target, int output, T w1, T w2) {
  return g.add(g.mul_scalar(l1_loss(g, target, output), w1),
               g.mul_scalar(ssim_loss(g, target, output), w2));
}

} // namespace spim

#endif // SPIM_MODEL_HPP
