#include "avsd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace avsd {

namespace {

constexpr double kWeightTolerance = 1e-9;
constexpr double kResidualClampTolerance = 1e-6;

}  // namespace

ViewFamily::ViewFamily(std::vector<LogDist> views)
    : ViewFamily(std::move(views), {}) {}

ViewFamily::ViewFamily(std::vector<LogDist> views, std::vector<double> weights)
    : views_(std::move(views)), weights_(std::move(weights)) {
  if (views_.empty()) throw RejectedInput("view family needs at least one view");
  for (const auto& v : views_) require_same_size(v.size(), views_.front().size(), "view family");
  if (weights_.empty()) {
    weights_.assign(views_.size(), 1.0 / static_cast<double>(views_.size()));
    return;
  }
  if (weights_.size() != views_.size()) {
    throw RejectedInput("view weights: expected " + std::to_string(views_.size()) + " entries");
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw RejectedInput("view weights must be nonnegative");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > kWeightTolerance) throw RejectedInput("view weights must sum to 1");
}

Mat per_view_advantages(const LogDist& p, const ViewFamily& fam) {
  require_same_size(p.size(), fam.vocab_size(), "per_view_advantages");
  Mat delta(static_cast<Eigen::Index>(fam.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t m = 0; m < fam.size(); ++m) {
    delta.row(static_cast<Eigen::Index>(m)) = (fam[m].logp() - p.logp()).transpose();
  }
  return delta;
}

GeometricConsensus geometric_consensus(const ViewFamily& fam) {
  Vec log_unnorm = Vec::Zero(static_cast<Eigen::Index>(fam.vocab_size()));
  const auto w = fam.weights();
  for (std::size_t m = 0; m < fam.size(); ++m) log_unnorm += w[m] * fam[m].logp();
  auto normalized = LogDist::from_log_probs(log_unnorm);
  return {std::move(log_unnorm), std::move(normalized)};
}

LogDist arithmetic_marginal(const ViewFamily& fam) {
  const auto n = static_cast<Eigen::Index>(fam.vocab_size());
  const auto w = fam.weights();
  Vec out(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < fam.size(); ++m) {
      if (w[m] > 0.0) hi = std::max(hi, fam[m].logp()[v]);
    }
    double acc = 0.0;
    for (std::size_t m = 0; m < fam.size(); ++m) {
      if (w[m] > 0.0) acc += w[m] * std::exp(fam[m].logp()[v] - hi);
    }
    out[v] = hi + std::log(acc);
  }
  return LogDist::from_log_probs(out);
}

Vec cross_view_residual(const LogDist& qa, const Vec& log_qg_unnorm) {
  require_same_size(qa.size(), static_cast<std::size_t>(log_qg_unnorm.size()), "cross_view_residual");
  Vec j = qa.logp() - log_qg_unnorm;
  for (Eigen::Index v = 0; v < j.size(); ++v) {
    if (j[v] < -kResidualClampTolerance) {
      throw ConsistencyError("cross-view residual " + std::to_string(j[v]) + " at token " +
                             std::to_string(v) + " violates AM-GM; inputs are inconsistent");
    }
    j[v] = std::max(j[v], 0.0);
  }
  return j;
}

Vec consensus_advantage(const Mat& delta, std::span<const double> weights) {
  if (static_cast<std::size_t>(delta.rows()) != weights.size()) {
    throw RejectedInput("consensus_advantage: weight count does not match view count");
  }
  Vec a = Vec::Zero(delta.cols());
  for (Eigen::Index m = 0; m < delta.rows(); ++m) {
    a += weights[static_cast<std::size_t>(m)] * delta.row(m).transpose();
  }
  return a;
}

GateValues gate(const Mat& delta, std::span<const double> weights, const Vec& a_geo,
                const Vec& residual, double epsilon) {
  if (!(epsilon > 0.0)) throw RejectedInput("gate epsilon must be positive");
  if (static_cast<std::size_t>(delta.rows()) != weights.size() || delta.cols() != a_geo.size() ||
      a_geo.size() != residual.size()) {
    throw RejectedInput("gate: shape mismatch");
  }
  const auto n = a_geo.size();
  GateValues g{Vec(n), Vec(n), Vec(n)};
  for (Eigen::Index v = 0; v < n; ++v) {
    double mean_abs = 0.0;
    for (Eigen::Index m = 0; m < delta.rows(); ++m) {
      mean_abs += weights[static_cast<std::size_t>(m)] * std::abs(delta(m, v));
    }
    const double consensus = std::abs(a_geo[v]);
    // |sum w d| <= sum w |d| in exact arithmetic; clamp the rounding excess.
    g.c[v] = std::min(1.0, consensus / (mean_abs + epsilon));
    g.r[v] = consensus / (consensus + residual[v] + epsilon);
    g.lambda[v] = g.c[v] * g.r[v];
  }
  return g;
}

Reconstruction reconstruct(const Vec& a_geo, const Vec& log_qg_unnorm, const Vec& residual,
                           const Vec& lambda) {
  if (a_geo.size() != log_qg_unnorm.size() || a_geo.size() != residual.size() ||
      a_geo.size() != lambda.size()) {
    throw RejectedInput("reconstruct: shape mismatch");
  }
  const Vec lifted = lambda.cwiseProduct(residual);
  Vec a_hat = a_geo + lifted;
  auto qstar = LogDist::from_log_probs(log_qg_unnorm + lifted);
  return {std::move(a_hat), std::move(qstar)};
}

PooledSignal pool(const LogDist& p, const ViewFamily& fam, double epsilon, GateOverride override_gate) {
  Mat delta = per_view_advantages(p, fam);
  Vec a_geo = consensus_advantage(delta, fam.weights());
  auto geo = geometric_consensus(fam);
  auto qa = arithmetic_marginal(fam);
  Vec a_arith = qa.logp() - p.logp();
  Vec residual = cross_view_residual(qa, geo.log_unnorm);
  auto g = gate(delta, fam.weights(), a_geo, residual, epsilon);
  if (override_gate == GateOverride::closed) g.lambda.setZero();
  if (override_gate == GateOverride::open) g.lambda.setOnes();
  auto rec = reconstruct(a_geo, geo.log_unnorm, residual, g.lambda);
  return PooledSignal{std::move(delta),
                      std::move(a_geo),
                      std::move(a_arith),
                      std::move(geo.log_unnorm),
                      std::move(geo.normalized),
                      std::move(qa),
                      std::move(residual),
                      std::move(g.c),
                      std::move(g.r),
                      std::move(g.lambda),
                      std::move(rec.a_hat),
                      std::move(rec.qstar)};
}

}  // namespace avsd
