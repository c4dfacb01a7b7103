#pragma once

// Independent reference computations for the adaptation math. Nothing here
// calls into the library's loss or gradient code.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tta/lm/matrix.hpp"
#include "tta/lm/tokenizer.hpp"

namespace tta::oracle {

struct Fixture {
  lm::Matrix base_logits;        // n x V
  lm::Matrix output_projection;  // V x d
  std::vector<double> delta;     // d
  std::vector<lm::TokenId> ids;  // n
};

// d in [2, 64], |V| in [2, 512], n in [2, 16]; logits and delta drawn at
// scales a small model produces.
inline Fixture random_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const std::size_t d = uni(2, 64), V = uni(2, 512), n = uni(2, 16);
  std::normal_distribution<double> g(0.0, 1.0);
  Fixture f;
  f.base_logits = lm::Matrix(n, V);
  for (auto& v : f.base_logits.data()) v = 2.0 * g(rng);
  f.output_projection = lm::Matrix(V, d);
  for (auto& v : f.output_projection.data()) v = g(rng) / std::sqrt(static_cast<double>(d));
  f.delta.resize(d);
  for (auto& v : f.delta) v = 0.3 * g(rng);
  f.ids.resize(n);
  for (auto& id : f.ids) id = static_cast<lm::TokenId>(uni(0, V - 1));
  return f;
}

// Mean cross-entropy of rows 0..n-2 against ids 1..n-1 with logits
// base + W delta, in long double.
inline double loss(const lm::Matrix& base, const lm::Matrix& W, std::span<const double> delta,
                   std::span<const lm::TokenId> ids) {
  const std::size_t V = W.rows(), d = W.cols();
  std::vector<long double> shift(V, 0.0L);
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t k = 0; k < d; ++k) shift[v] += static_cast<long double>(W(v, k)) * delta[k];
  long double total = 0.0L;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    long double m = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) m = std::max(m, base(t, v) + shift[v]);
    long double s = 0.0L;
    for (std::size_t v = 0; v < V; ++v) s += std::exp(base(t, v) + shift[v] - m);
    const auto target = static_cast<std::size_t>(ids[t + 1]);
    total += m + std::log(s) - (base(t, target) + shift[target]);
  }
  return static_cast<double>(total / static_cast<long double>(ids.size() - 1));
}

inline std::vector<double> finite_difference_gradient(const lm::Matrix& base, const lm::Matrix& W,
                                                      std::span<const double> delta,
                                                      std::span<const lm::TokenId> ids, double h = 1e-5) {
  std::vector<double> x(delta.begin(), delta.end()), g(delta.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = loss(base, W, x, ids);
    x[k] = keep - h;
    const double down = loss(base, W, x, ids);
    x[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// Softmax-minus-onehot gradient accumulated in long double, written out
// independently of the library's version.
inline std::vector<double> analytic_gradient(const lm::Matrix& base, const lm::Matrix& W, std::span<const double> delta,
                                             std::span<const lm::TokenId> ids) {
  const std::size_t V = W.rows(), d = W.cols(), n = ids.size();
  std::vector<long double> z(V), mean_residual(V, 0.0L);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    long double m = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) {
      long double s = base(t, v);
      for (std::size_t k = 0; k < d; ++k) s += static_cast<long double>(W(v, k)) * delta[k];
      z[v] = s;
      m = std::max(m, s);
    }
    long double sum = 0.0L;
    for (auto& x : z) sum += (x = std::exp(x - m));
    for (std::size_t v = 0; v < V; ++v) mean_residual[v] += z[v] / sum;
    mean_residual[static_cast<std::size_t>(ids[t + 1])] -= 1.0L;
  }
  std::vector<double> g(d);
  for (std::size_t k = 0; k < d; ++k) {
    long double s = 0.0L;
    for (std::size_t v = 0; v < V; ++v) s += W(v, k) * mean_residual[v];
    g[k] = static_cast<double>(s / static_cast<long double>(n - 1));
  }
  return g;
}

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b|| / max(||b||, floor)
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s) / std::max(norm(b), floor);
}

}  // namespace tta::oracle
