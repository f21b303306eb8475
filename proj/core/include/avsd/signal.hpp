#pragma once

// Multi-view pooling of teacher distributions into a gated reconstructed
// target. All functions are pure.

#include <span>
#include <vector>

#include "avsd/log_dist.hpp"

namespace avsd {

inline constexpr double kDefaultEpsilon = 1e-8;

/// M view-conditioned teacher distributions over one vocabulary, with
/// nonnegative view weights summing to one (uniform unless given).
class ViewFamily {
 public:
  explicit ViewFamily(std::vector<LogDist> views);
  ViewFamily(std::vector<LogDist> views, std::vector<double> weights);

  [[nodiscard]] std::size_t size() const noexcept { return views_.size(); }
  [[nodiscard]] std::size_t vocab_size() const noexcept { return views_.front().size(); }
  [[nodiscard]] const std::vector<LogDist>& views() const noexcept { return views_; }
  [[nodiscard]] const LogDist& operator[](std::size_t m) const { return views_.at(m); }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }

 private:
  std::vector<LogDist> views_;
  std::vector<double> weights_;
};

/// Gate behaviour for the reconstructed target. `closed` pins lambda to 0
/// (geometric consensus), `open` pins it to 1 (arithmetic marginal).
enum class GateOverride { none, closed, open };

struct GeometricConsensus {
  Vec log_unnorm;  // sum_m w_m log q_m(v)
  LogDist normalized;
};

struct GateValues {
  Vec c;       // alignment component
  Vec r;       // magnitude component
  Vec lambda;  // c * r
};

struct Reconstruction {
  Vec a_hat;
  LogDist qstar;
};

struct PooledSignal {
  Mat delta;  // M x |V|
  Vec a_geo;
  Vec a_arith;
  Vec log_qg_unnorm;
  LogDist qg;
  LogDist qa;
  Vec residual;
  Vec c_gate;
  Vec r_gate;
  Vec lambda;
  Vec a_hat;
  LogDist qstar;
};

/// delta(m, v) = log q_m(v) - log p(v).
Mat per_view_advantages(const LogDist& p, const ViewFamily& fam);

GeometricConsensus geometric_consensus(const ViewFamily& fam);

/// Probability-space weighted mean of the views, returned in log space.
LogDist arithmetic_marginal(const ViewFamily& fam);

/// J(v) = log qA(v) - log q~G(v). Non-negative by AM-GM; rounding noise down
/// to -1e-6 is clamped to zero, anything lower throws ConsistencyError.
Vec cross_view_residual(const LogDist& qa, const Vec& log_qg_unnorm);

Vec consensus_advantage(const Mat& delta, std::span<const double> weights);

GateValues gate(const Mat& delta, std::span<const double> weights, const Vec& a_geo,
                const Vec& residual, double epsilon = kDefaultEpsilon);

Reconstruction reconstruct(const Vec& a_geo, const Vec& log_qg_unnorm, const Vec& residual,
                           const Vec& lambda);

PooledSignal pool(const LogDist& p, const ViewFamily& fam, double epsilon = kDefaultEpsilon,
                  GateOverride override_gate = GateOverride::none);

}  // namespace avsd
