#ifndef SPIM_NN_ADAM_HPP
#define SPIM_NN_ADAM_HPP

#include <cmath>
#include <vector>

#include "spim/common.hpp"
#include "spim/nn/graph.hpp"

namespace spim::nn {

/// Bias-corrected Adam over a fixed list of parameter tensors.
template <typename T>
struct Adam {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  long step = 0;
  std::vector<std::vector<T>> m, v;

  void init(const std::vector<Tensor<T>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.numel(), T(0));
      v.emplace_back(p.numel(), T(0));
    }
    step = 0;
  }

  /// One update. grads[i] may be empty (parameter not touched this step).
  void update(std::vector<Tensor<T>>& params, const std::vector<std::vector<T>>& grads) {
    if (params.size() != m.size() || grads.size() != params.size())
      throw invalid_input("adam buffers do not match parameter list");
    ++step;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step));
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (grads[p].empty()) continue;
      if (grads[p].size() != params[p].numel())
        throw invalid_input("gradient shape does not match parameter");
      auto& mp = m[p];
      auto& vp = v[p];
      auto& w = params[p].data;
      const auto& g = grads[p];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(static_cast<double>(g[i])))
          throw numerical_error("non-finite gradient in adam update");
        mp[i] = beta1 * mp[i] + (T(1) - beta1) * g[i];
        vp[i] = beta2 * vp[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = mp[i] / bc1;
        const T vhat = vp[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

} // namespace spim::nn

#endif // SPIM_NN_ADAM_HPP
