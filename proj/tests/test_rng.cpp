#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spim/rng.hpp"

using spim::Rng;

TEST_CASE("same seed and stream reproduce the sequence") {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams decorrelate") {
  Rng a(42, 0), b(42, 1);
  int same = 0;
  for (int i = 0; i < 1000; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  REQUIRE(same == 0);
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
  Rng rng(1, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.01);
  REQUIRE(hi > 0.99);
}

TEST_CASE("uniform_below is unbiased enough and in range") {
  Rng rng(2, 0);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto v = rng.uniform_below(10);
    REQUIRE(v < 10);
    ++counts[v];
  }
  for (int c : counts) REQUIRE(std::abs(c - 10000) < 500);
}

TEST_CASE("gaussian moments") {
  Rng rng(3, 0);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("poisson edge cases and moments") {
  Rng rng(4, 0);
  REQUIRE(rng.poisson(0.0) == 0);
  REQUIRE_THROWS_AS(rng.poisson(-1.0), spim::invalid_input);

  for (double rate : {3.7, 80.0}) {  // below and above the PTRS switch
    Rng r2(5, 0);
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(r2.poisson(rate));
      sum += k;
      sum2 += k * k;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double se_mean = std::sqrt(rate / n);
    REQUIRE(std::abs(mean - rate) < 4 * se_mean);
    REQUIRE(std::abs(var - rate) / rate < 0.05);
  }
}

TEST_CASE("beta(0.7, 0.7) support and symmetry") {
  Rng rng(6, 0);
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double b = rng.beta(0.7, 0.7);
    REQUIRE(b > 0.0);
    REQUIRE(b < 1.0);
    sum += b;
  }
  // mean alpha/(alpha+beta) = 0.5, var = ab/((a+b)^2 (a+b+1)) = 0.7^2/(1.96*2.4)
  const double var = 0.49 / (1.96 * 2.4);
  REQUIRE(std::abs(sum / n - 0.5) < 3 * std::sqrt(var / n));
}

TEST_CASE("permutation is a bijection and seed-deterministic") {
  Rng a(7, 0), b(7, 0);
  auto pa = a.permutation(257);
  auto pb = b.permutation(257);
  REQUIRE(pa == pb);
  std::sort(pa.begin(), pa.end());
  for (std::uint32_t i = 0; i < 257; ++i) REQUIRE(pa[i] == i);
}
