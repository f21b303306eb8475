#pragma once

// Post-hoc analyses of a trained model: sign of token credit on incorrect
// rollouts, and how often the gate admits the residual.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avsd/trainer.hpp"

namespace avsd {

struct CreditEntry {
  std::size_t position = 0;
  Token token = 0;
  double advantage = 0.0;
  int sign = 0;  // -1, 0, +1
};

struct CreditReport {
  std::uint64_t rollout_id = 0;
  std::vector<CreditEntry> top;  // sorted by |advantage| descending, ties by position
  double fraction_wrong_sign = 0.0;
};

/// Top-k positions of one rollout by |advantage|; a positive advantage on an
/// incorrect rollout promotes a wrong token and counts as wrong-signed.
CreditReport credit_report(std::uint64_t rollout_id, std::span<const Token> tokens,
                           std::span<const double> advantages, std::size_t k);

struct CreditAggregate {
  std::size_t rollouts = 0;
  std::size_t positions = 0;
  std::size_t wrong_sign = 0;
  double fraction_wrong_sign = 0.0;
  bool no_incorrect_rollouts = true;
};

CreditAggregate aggregate_credit(std::span<const CreditReport> reports);

struct CreditAnalysis {
  std::size_t sampled = 0;
  std::vector<CreditReport> avsd;  // advantage: a_hat at the sampled token
  std::vector<CreditReport> opsd;  // advantage: log q_view - log p with a single view
  CreditAggregate avsd_total;
  CreditAggregate opsd_total;
};

/// One rollout per instance (instance i samples from split_rng(seed, i)),
/// keeping the incorrect ones. The single-view comparison uses the full
/// solution view when configured, otherwise the first view.
CreditAnalysis analyze_credit(const ToyLMParams& params, const std::vector<TaskInstance>& instances,
                              const TrainConfig& cfg, std::size_t k, std::uint64_t seed);

inline constexpr std::size_t kGateBins = 20;

struct GateReport {
  std::size_t positions = 0;
  double threshold = 0.5;
  double open_rate = 0.0;  // fraction with lambda > threshold
  double mean_lambda = 0.0;
  std::array<std::size_t, kGateBins> histogram{};  // bin i covers [i/20, (i+1)/20), the last includes 1
};

GateReport gate_report(std::span<const double> lambdas, double threshold);

/// Lambda at every sampled token of one rollout per instance.
GateReport analyze_gate(const ToyLMParams& params, const std::vector<TaskInstance>& instances,
                        const TrainConfig& cfg, double threshold, std::uint64_t seed);

/// Pooled signal at every position of a given rollout (no gradients).
std::vector<PooledSignal> score_rollout(const ToyLMParams& params, const TaskInstance& inst,
                                        std::span<const ViewKind> views, const Rollout& rollout,
                                        double epsilon, GateOverride override_gate = GateOverride::none);

}  // namespace avsd
