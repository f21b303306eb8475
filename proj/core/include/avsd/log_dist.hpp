#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace avsd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower clamp applied to every log-probability that enters the pooling
/// pipeline. exp(-45) ~ 2.9e-20, far below anything a toy vocabulary resolves.
inline constexpr double kLogFloor = -45.0;

/// Thrown for malformed caller input (shape mismatches, bad indices, ...).
class RejectedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an internal identity that must hold for valid inputs fails.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

double log_sum_exp(const Vec& x);
Vec log_softmax(const Vec& logits);

/// A normalized next-token distribution stored as natural-log probabilities.
///
/// Every constructor floors entries at kLogFloor and renormalizes the
/// non-floored mass, so log-sum-exp(logp) == 0 (to ~1e-15) and no entry is
/// below the floor.
class LogDist {
 public:
  LogDist() = default;

  static LogDist from_logits(const Vec& logits);
  static LogDist from_log_probs(const Vec& log_probs);
  static LogDist from_probs(std::span<const double> probs);
  static LogDist uniform(std::size_t n);

  [[nodiscard]] const Vec& logp() const noexcept { return logp_; }
  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(logp_.size()); }
  [[nodiscard]] double operator[](std::size_t i) const { return logp_[static_cast<Eigen::Index>(i)]; }
  [[nodiscard]] double prob(std::size_t i) const;
  [[nodiscard]] Vec probs() const { return logp_.array().exp().matrix(); }

 private:
  explicit LogDist(Vec logp) : logp_(std::move(logp)) {}
  Vec logp_;
};

void require_same_size(std::size_t a, std::size_t b, const std::string& what);

}  // namespace avsd
