#include "avsd/rkl.hpp"

#include <algorithm>
#include <cmath>

namespace avsd {

namespace {

double kl_from_logs(const Vec& log_p, const Vec& log_q) {
  double acc = 0.0;
  for (Eigen::Index v = 0; v < log_p.size(); ++v) {
    acc += std::exp(log_p[v]) * (log_p[v] - log_q[v]);
  }
  // Rounding can leave a -1e-17 residue at p == q.
  return std::max(acc, 0.0);
}

}  // namespace

double reverse_kl(const LogDist& p, const LogDist& q) {
  require_same_size(p.size(), q.size(), "reverse_kl");
  return kl_from_logs(p.logp(), q.logp());
}

LossGrad rkl_grad_logits(const LogitsRow& z, const LogDist& q) {
  require_same_size(static_cast<std::size_t>(z.size()), q.size(), "rkl_grad_logits");
  const Vec log_p = log_softmax(z);
  const Vec p = log_p.array().exp().matrix();
  const Vec gap = log_p - q.logp();
  const double k = p.dot(gap);
  LossGrad out;
  out.loss = std::max(k, 0.0);
  out.dz = p.cwiseProduct((gap.array() - k).matrix());
  return out;
}

double sampled_advantage(const LogDist& p, const LogDist& target, std::size_t token) {
  require_same_size(p.size(), target.size(), "sampled_advantage");
  if (token >= p.size()) throw RejectedInput("sampled_advantage: token out of range");
  return target[token] - p[token];
}

double policy_gradient_identity_check(const LogitsRow& z, const LogDist& q) {
  require_same_size(static_cast<std::size_t>(z.size()), q.size(), "policy_gradient_identity_check");
  const auto n = z.size();
  const Vec log_p = log_softmax(z);
  const Vec p = log_p.array().exp().matrix();
  Vec expectation = Vec::Zero(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const double advantage = q.logp()[v] - log_p[v];
    for (Eigen::Index u = 0; u < n; ++u) {
      const double dlogp = (u == v ? 1.0 : 0.0) - p[u];
      expectation[u] += p[v] * advantage * dlogp;
    }
  }
  const Vec descent = -rkl_grad_logits(z, q).dz;
  return (expectation - descent).cwiseAbs().maxCoeff();
}

SequenceLoss sequence_loss(std::span<const PositionTarget> records, bool normalize_by_length) {
  if (records.empty()) throw RejectedInput("sequence_loss: empty position list");
  SequenceLoss out;
  out.per_position.reserve(records.size());
  const double scale = normalize_by_length ? 1.0 / static_cast<double>(records.size()) : 1.0;
  for (const auto& rec : records) {
    auto lg = rkl_grad_logits(rec.logits, rec.target);
    lg.loss *= scale;
    lg.dz *= scale;
    out.total += lg.loss;
    out.per_position.push_back(std::move(lg));
  }
  return out;
}

double avg_reverse_kl(const LogDist& q, const ViewFamily& fam) {
  require_same_size(q.size(), fam.vocab_size(), "avg_reverse_kl");
  double acc = 0.0;
  for (std::size_t m = 0; m < fam.size(); ++m) acc += fam.weights()[m] * reverse_kl(q, fam[m]);
  return acc;
}

double avg_forward_kl(const ViewFamily& fam, const LogDist& q) {
  require_same_size(q.size(), fam.vocab_size(), "avg_forward_kl");
  double acc = 0.0;
  for (std::size_t m = 0; m < fam.size(); ++m) acc += fam.weights()[m] * reverse_kl(fam[m], q);
  return acc;
}

}  // namespace avsd
