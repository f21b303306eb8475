#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avsd/log_dist.hpp"
#include "avsd/signal.hpp"

namespace avsd {

/// Unnormalized student logits for one prefix position.
using LogitsRow = Vec;

struct LossGrad {
  double loss = 0.0;
  Vec dz;  // d loss / d logits
};

/// D_KL(p || q) = sum_v p(v) (log p(v) - log q(v)).
double reverse_kl(const LogDist& p, const LogDist& q);

/// Reverse KL from softmax(z) to a fixed target together with its exact
/// gradient in logit space: dz(v) = p(v) (log p(v) - log q(v) - KL).
/// The student side uses the exact log-softmax of z (no floor), so the
/// returned gradient is the derivative of the returned loss.
LossGrad rkl_grad_logits(const LogitsRow& z, const LogDist& q);

/// log target(token) - log p(token).
double sampled_advantage(const LogDist& p, const LogDist& target, std::size_t token);

/// Evaluates E_{v~p}[A(v) d log p(v)/dz] by explicit summation over the
/// vocabulary with the full softmax Jacobian, and returns its max abs
/// difference from -rkl_grad_logits(z, q).dz.
double policy_gradient_identity_check(const LogitsRow& z, const LogDist& q);

struct PositionTarget {
  LogitsRow logits;
  LogDist target;  // held constant: no gradient path through it
};

struct SequenceLoss {
  double total = 0.0;
  std::vector<LossGrad> per_position;
};

/// Sum over positions of reverse_kl(softmax(z_t), target_t); when
/// normalize_by_length is set, the loss and gradients are divided by the
/// number of positions.
SequenceLoss sequence_loss(std::span<const PositionTarget> records, bool normalize_by_length = false);

/// Weighted mean of D_KL(q || q_m) over the family.
double avg_reverse_kl(const LogDist& q, const ViewFamily& fam);
/// Weighted mean of D_KL(q_m || q) over the family.
double avg_forward_kl(const ViewFamily& fam, const LogDist& q);

}  // namespace avsd
