#ifndef SPIM_TESTS_FD_CHECK_HPP
#define SPIM_TESTS_FD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spim/nn/graph.hpp"

namespace fd {

/// Builds a scalar node out of graph leaves created from `inputs` (in order).
using Builder =
    std::function<int(spim::nn::Graph<double>&, const std::vector<int>&)>;

/// Worst relative error between reverse-mode and central finite-difference
/// gradients over every element of every input tensor.
inline double max_rel_error(const Builder& build,
                            const std::vector<spim::nn::Tensor<double>>& inputs,
                            double h = 1e-5) {
  auto eval = [&](const std::vector<spim::nn::Tensor<double>>& in) {
    spim::nn::Graph<double> g;
    std::vector<int> ids;
    ids.reserve(in.size());
    for (const auto& t : in) ids.push_back(g.leaf(t, true));
    return g.value(build(g, ids)).data[0];
  };

  spim::nn::Graph<double> g;
  std::vector<int> ids;
  for (const auto& t : inputs) ids.push_back(g.leaf(t, true));
  const int out = build(g, ids);
  g.backward(out);

  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& gt = g.grad(ids[t]).data;  // may be empty: zero gradient
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[t].data[i] += h;
      minus[t].data[i] -= h;
      const double fdv = (eval(plus) - eval(minus)) / (2.0 * h);
      const double an = gt.empty() ? 0.0 : gt[i];
      const double denom = std::max({std::abs(fdv), std::abs(an), 1e-4});
      worst = std::max(worst, std::abs(fdv - an) / denom);
    }
  }
  return worst;
}

} // namespace fd

#endif // SPIM_TESTS_FD_CHECK_HPP
