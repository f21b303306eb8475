#include "avsd/log_dist.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace avsd {

double log_sum_exp(const Vec& x) {
  if (x.size() == 0) throw RejectedInput("log_sum_exp of empty vector");
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

Vec log_softmax(const Vec& logits) {
  return (logits.array() - log_sum_exp(logits)).matrix();
}

namespace {

// Floors entries at kLogFloor while keeping the vector normalized: floored
// entries are pinned at exactly kLogFloor and the free entries are shifted so
// that the total mass is one. Shifting can push a free entry under the floor,
// hence the loop (it settles in one or two passes in practice).
Vec floor_and_normalize(Vec lp) {
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    if (std::isnan(lp[i])) throw RejectedInput("NaN log-probability");
  }
  lp = log_softmax(lp);
  const auto n = lp.size();
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  for (int pass = 0; pass < 2 * n + 2; ++pass) {
    std::size_t n_pinned = 0;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)] && lp[i] < kLogFloor) {
        pinned[static_cast<std::size_t>(i)] = true;
        changed = true;
      }
      if (pinned[static_cast<std::size_t>(i)]) {
        lp[i] = kLogFloor;
        ++n_pinned;
      }
    }
    if (!changed) break;
    if (n_pinned == static_cast<std::size_t>(n)) {
      // Every entry floored: the only normalized answer is uniform.
      lp.setConstant(-std::log(static_cast<double>(n)));
      break;
    }
    double free_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) free_max = std::max(free_max, lp[i]);
    }
    double free_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) free_sum += std::exp(lp[i] - free_max);
    }
    const double log_free = free_max + std::log(free_sum);
    const double target = std::log1p(-static_cast<double>(n_pinned) * std::exp(kLogFloor));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) lp[i] += target - log_free;
    }
  }
  return lp;
}

}  // namespace

LogDist LogDist::from_logits(const Vec& logits) {
  if (logits.size() == 0) throw RejectedInput("empty logits");
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw RejectedInput("non-finite logit");
  }
  return LogDist(floor_and_normalize(logits));
}

LogDist LogDist::from_log_probs(const Vec& log_probs) {
  if (log_probs.size() == 0) throw RejectedInput("empty distribution");
  Vec lp = log_probs;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    if (std::isinf(lp[i]) && lp[i] > 0) throw RejectedInput("+Inf log-probability");
    if (std::isinf(lp[i])) lp[i] = kLogFloor;
  }
  return LogDist(floor_and_normalize(std::move(lp)));
}

LogDist LogDist::from_probs(std::span<const double> probs) {
  Vec lp(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0)) throw RejectedInput("negative or NaN probability");
    lp[static_cast<Eigen::Index>(i)] = probs[i] > 0.0 ? std::log(probs[i]) : kLogFloor;
  }
  return from_log_probs(lp);
}

LogDist LogDist::uniform(std::size_t n) {
  if (n == 0) throw RejectedInput("empty vocabulary");
  return LogDist(Vec::Constant(static_cast<Eigen::Index>(n), -std::log(static_cast<double>(n))));
}

double LogDist::prob(std::size_t i) const { return std::exp((*this)[i]); }

void require_same_size(std::size_t a, std::size_t b, const std::string& what) {
  if (a != b) {
    throw RejectedInput(what + ": vocabulary size mismatch (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
}

}  // namespace avsd
