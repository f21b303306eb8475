#pragma once

// Shared helpers for the unit and acceptance tests: seeded random
// distributions and finite-difference oracles that do not reuse the
// library's gradient code.

#include <algorithm>
#include <cmath>
#include <vector>

#include "avsd/rkl.hpp"
#include "avsd/rng.hpp"
#include "avsd/signal.hpp"
#include "avsd/toy_lm.hpp"

namespace avsd::test {

inline Vec random_logits(Rng& rng, std::size_t n, double scale) {
  Vec z(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = scale * standard_normal(rng);
  return z;
}

/// Random distribution; a large scale gives peaked, near-degenerate draws.
inline LogDist random_dist(Rng& rng, std::size_t n) {
  const double scales[] = {0.3, 1.0, 3.0, 8.0};
  return LogDist::from_logits(random_logits(rng, n, scales[uniform_index(rng, 4)]));
}

inline ViewFamily random_family(Rng& rng, std::size_t n, std::size_t m, bool weighted) {
  std::vector<LogDist> views;
  for (std::size_t i = 0; i < m; ++i) views.push_back(random_dist(rng, n));
  if (!weighted) return ViewFamily(std::move(views));
  std::vector<double> w(m);
  double sum = 0.0;
  for (auto& x : w) sum += (x = 0.05 + uniform01(rng));
  for (auto& x : w) x /= sum;
  // Make the weights sum to one exactly enough for the 1e-9 check.
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) acc += w[i];
  w[m - 1] = 1.0 - acc;
  return ViewFamily(std::move(views), std::move(w));
}

/// Direct evaluation of KL(softmax(z) || q) with plain loops.
inline double kl_of_logits(const Vec& z, const LogDist& q) {
  const double mx = z.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += std::exp(z[i] - mx);
  const double lse = mx + std::log(s);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double lp = z[i] - lse;
    kl += std::exp(lp) * (lp - q[static_cast<std::size_t>(i)]);
  }
  return kl;
}

inline Vec fd_grad_logits(const Vec& z, const LogDist& q, double h = 1e-5) {
  Vec g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (kl_of_logits(zp, q) - kl_of_logits(zm, q)) / (2 * h);
  }
  return g;
}

/// max |a - b| / max(|b|, floor) over entries.
inline double rel_error(const Vec& a, const Vec& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

/// Finite-difference check of the toy model backward pass on the scalar
/// z(params, prefix) . dz. Returns the worst relative error over a sample of
/// parameters from every block (all of them when the block is small).
inline double toy_lm_fd_error(const ToyLMParams& params, const std::vector<Token>& prefix, const Vec& dz,
                              Rng& rng, std::size_t per_block = 12, double h = 1e-5) {
  const auto analytic = backward(params, prefix, dz);
  auto objective = [&](const ToyLMParams& p) { return forward(p, prefix).dot(dz); };
  double worst = 0.0;
  ToyLMParams probe = params;
  auto blocks = probe.blocks();
  const auto grads = analytic.blocks();
  for (std::size_t b = 0; b < kParamBlockCount; ++b) {
    const std::size_t n = blocks[b].size();
    const std::size_t count = std::min(per_block, n);
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = count == n ? c : uniform_index(rng, n);
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const double up = objective(probe);
      blocks[b][i] = saved - h;
      const double down = objective(probe);
      blocks[b][i] = saved;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(fd - grads[b][i]) / std::max({std::abs(fd), std::abs(grads[b][i]), 1e-4});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline double max_abs_diff(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline double max_abs_diff(const ToyLMParams& a, const ToyLMParams& b) {
  double worst = 0.0;
  const auto ba = a.blocks();
  const auto bb = b.blocks();
  for (std::size_t k = 0; k < kParamBlockCount; ++k) {
    for (std::size_t i = 0; i < ba[k].size(); ++i) worst = std::max(worst, std::abs(ba[k][i] - bb[k][i]));
  }
  return worst;
}

}  // namespace avsd::test
