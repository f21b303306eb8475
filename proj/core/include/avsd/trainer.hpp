#pragma once

// On-policy multi-view self-distillation: rollouts from the student, one
// teacher evaluation per view at every prefix, pooled target, reverse-KL
// gradient through the student only.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avsd/signal.hpp"
#include "avsd/task.hpp"
#include "avsd/toy_lm.hpp"

namespace avsd {

enum class Method { avsd, opsd, consensus_only, arithmetic_only };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

/// Copy-skill warmup that stands in for a pretrained base model: supervised
/// next-token training on teacher-format sequences whose view context comes
/// from a different instance than the problem. The model learns to read the
/// view, not to do arithmetic.
struct PretrainConfig {
  std::size_t steps = 1500;
  std::size_t batch_size = 32;
  double lr = 1e-2;
  double corrupt_prob = 0.3;  // chance a teacher-forced digit is replaced
  std::vector<ViewKind> views{ViewKind::full_solution, ViewKind::partial_solution, ViewKind::final_answer};
  /// Copy-skill sequences mixed into every distillation step (0 disables).
  /// They pair a view with an unrelated problem, so they carry no
  /// information about the answer to any prompt.
  std::size_t rehearsal_batch = 16;
  double rehearsal_weight = 1.0;
};

struct TrainConfig {
  Method method = Method::avsd;
  std::vector<ViewKind> views_used{ViewKind::full_solution, ViewKind::partial_solution,
                                   ViewKind::final_answer};
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double rollout_temperature = 0.7;
  std::size_t max_len = 0;  // 0: derived from the task
  double epsilon = kDefaultEpsilon;
  AdamOptions optimizer{};
  std::uint64_t seed = 0;
  std::optional<bool> normalize_by_length;  // unset: on for opsd only
  GateOverride gate_override = GateOverride::none;
  double gate_threshold = 0.5;
  std::size_t eval_every = 0;  // 0: evaluate only after the last step
  std::size_t eval_k = 8;
  std::size_t eval_instances = 200;
  double eval_temperature = 0.6;
  std::size_t checkpoint_every = 0;
  std::size_t workers = 1;
  TaskConfig task{};
  ToyLMConfig model{20, 16, 128, 16};  // wider and longer-context than the library default
  PretrainConfig pretrain{};

  void validate() const;
  [[nodiscard]] bool normalize() const;
  [[nodiscard]] std::size_t rollout_max_len() const;
  [[nodiscard]] SamplingOptions rollout_sampling() const;
  [[nodiscard]] SamplingOptions eval_sampling() const;
};

/// Seeds derived from the master seed, one per independent stream.
struct SeedPlan {
  std::uint64_t init;
  std::uint64_t pretrain;
  std::uint64_t train_data;
  std::uint64_t rollouts;
  std::uint64_t eval_data;
  std::uint64_t eval_sampling;
  std::uint64_t rehearsal;

  static SeedPlan from(std::uint64_t master);
};

struct StepLog {
  std::size_t step = 0;
  double mean_loss = 0.0;
  std::optional<double> eval_accuracy;
  double gate_open_rate = 0.0;
  double mean_lambda = 0.0;
  std::size_t positions = 0;
  double wall_ms = 0.0;
};

struct InstanceTrace {
  Rollout rollout;  // steps carry the pooled signal
  std::vector<ViewContext> views;
  double loss = 0.0;
};

struct StepOutput {
  ToyLMParams grads;  // mean over the batch
  double mean_loss = 0.0;
  double gate_open_rate = 0.0;
  double mean_lambda = 0.0;
  std::size_t positions = 0;
  std::vector<InstanceTrace> traces;
};

/// Distillation target at one prefix for the configured method.
LogDist method_target(Method method, const PooledSignal& signal, const ViewFamily& fam);

/// Rollout, teacher evaluation, pooling and reverse-KL backward for one
/// instance. Gradients are accumulated into `grads`.
InstanceTrace distill_instance(const ToyLMParams& params, const TaskInstance& inst,
                               const TrainConfig& cfg, Rng& rng, ToyLMParams& grads);

/// One step of the algorithm over a batch. Instance i samples from
/// split_rng(step_seed, i), and per-instance gradients are summed in index
/// order, so the result does not depend on cfg.workers.
StepOutput train_step(const ToyLMParams& params, const std::vector<TaskInstance>& batch,
                      const TrainConfig& cfg, std::uint64_t step_seed);

std::vector<TaskInstance> training_batch(const TrainConfig& cfg, std::size_t step);
std::vector<TaskInstance> heldout_set(const TrainConfig& cfg);
std::uint64_t step_seed(const TrainConfig& cfg, std::size_t step);

/// Seeded random init followed by the copy-skill warmup.
ToyLMParams base_model(const TrainConfig& cfg);
ToyLMParams random_init(const TrainConfig& cfg);

/// Cross-entropy gradient (scaled by `weight`) of `count` copy-skill
/// sequences with indices [first, first + count) of the stream `seed`.
/// Returns the summed weighted loss.
double accumulate_copy_skill(const ToyLMParams& params, const TrainConfig& cfg, std::uint64_t seed,
                             std::size_t first, std::size_t count, double weight, ToyLMParams& grads);

using RolloutSampler = std::function<std::vector<Token>(const TaskInstance&, Rng&)>;

/// Mean over instances of (correct samples among k)/k. Instance i draws from
/// split_rng(seed, i).
double eval_avg_at_k(const RolloutSampler& sampler, const std::vector<TaskInstance>& instances,
                     std::size_t k, std::uint64_t seed);
double eval_avg_at_k(const ToyLMParams& params, const std::vector<TaskInstance>& instances,
                     std::size_t k, const SamplingOptions& sampling, std::uint64_t seed);

struct TrainState {
  ToyLMParams params;
  AdamState optimizer;
  std::size_t step = 0;  // number of completed steps
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const TrainState&)> on_checkpoint;
  /// Return true to stop after the current step (used to simulate interruption).
  std::function<bool(std::size_t completed_steps)> should_stop;
};

struct TrainResult {
  TrainState state;
  std::vector<StepLog> logs;
  double final_accuracy = 0.0;
};

/// Runs steps [state.step, cfg.steps). With steps == state.step nothing is
/// changed.
TrainResult train_run(const TrainConfig& cfg, TrainState state, const TrainHooks& hooks = {});
TrainResult train_run(const TrainConfig& cfg, const TrainHooks& hooks = {});

struct ScaleRow {
  std::size_t view_count = 0;
  std::vector<std::pair<std::size_t, double>> checkpoints;  // (step, Avg@k)
};

/// Trains with 1..max_views views (full, partial, answer, own attempt in
/// that order); one view means OPSD on the full solution.
std::vector<ScaleRow> scale_views_experiment(const TrainConfig& base, std::size_t max_views = 4);

}  // namespace avsd
