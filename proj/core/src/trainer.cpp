#include "avsd/trainer.hpp"

#include <chrono>
#include <thread>

#include "avsd/rkl.hpp"

namespace avsd {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::avsd: return "avsd";
    case Method::opsd: return "opsd";
    case Method::consensus_only: return "consensus_only";
    case Method::arithmetic_only: return "arithmetic_only";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "avsd") return Method::avsd;
  if (s == "opsd") return Method::opsd;
  if (s == "consensus_only" || s == "consensus") return Method::consensus_only;
  if (s == "arithmetic_only" || s == "arithmetic") return Method::arithmetic_only;
  throw RejectedInput("method: unknown value '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  task.validate();
  model.validate();
  if (model.vocab != task.vocabulary().size()) {
    throw RejectedInput("model.vocab (" + std::to_string(model.vocab) + ") does not match the task vocabulary (" +
                        std::to_string(task.vocabulary().size()) + ")");
  }
  if (views_used.empty()) throw RejectedInput("views: at least one view is required");
  if (method == Method::opsd && views_used.size() != 1) {
    throw RejectedInput("views: method opsd requires exactly 1 view (got " + std::to_string(views_used.size()) + ")");
  }
  if (method != Method::opsd && views_used.size() < 2) {
    throw RejectedInput("views: method " + std::string(to_string(method)) + " requires at least 2 views");
  }
  if (batch_size == 0) throw RejectedInput("train.batch_size must be positive");
  if (!(rollout_temperature > 0.0)) throw RejectedInput("train.rollout_temperature must be positive");
  if (!(eval_temperature > 0.0)) throw RejectedInput("eval.temperature must be positive");
  if (!(epsilon > 0.0)) throw RejectedInput("train.epsilon must be positive");
  if (!(optimizer.lr > 0.0)) throw RejectedInput("optim.lr must be positive");
  if (eval_k == 0) throw RejectedInput("eval.k must be >= 1");
  if (!(gate_threshold >= 0.0 && gate_threshold <= 1.0)) throw RejectedInput("analysis.gate_threshold must lie in [0, 1]");
  if (workers == 0) throw RejectedInput("train.workers must be positive");
}

bool TrainConfig::normalize() const { return normalize_by_length.value_or(method == Method::opsd); }

std::size_t TrainConfig::rollout_max_len() const { return max_len > 0 ? max_len : default_max_len(task); }

SamplingOptions TrainConfig::rollout_sampling() const {
  return SamplingOptions{rollout_temperature, rollout_max_len(), Vocabulary::kEnd};
}

SamplingOptions TrainConfig::eval_sampling() const {
  return SamplingOptions{eval_temperature, rollout_max_len(), Vocabulary::kEnd};
}

SeedPlan SeedPlan::from(std::uint64_t master) {
  return SeedPlan{mix_seed(master ^ 0x1001), mix_seed(master ^ 0x2002), mix_seed(master ^ 0x3003),
                  mix_seed(master ^ 0x4004), mix_seed(master ^ 0x5005), mix_seed(master ^ 0x6006),
                  mix_seed(master ^ 0x7007)};
}

LogDist method_target(Method method, const PooledSignal& signal, const ViewFamily& fam) {
  switch (method) {
    case Method::avsd: return signal.qstar;
    case Method::consensus_only: return signal.qg;
    case Method::arithmetic_only: return signal.qa;
    case Method::opsd: return fam[0];
  }
  return signal.qstar;
}

InstanceTrace distill_instance(const ToyLMParams& params, const TaskInstance& inst, const TrainConfig& cfg,
                               Rng& rng, ToyLMParams& grads) {
  InstanceTrace trace;
  trace.rollout = sample_rollout(params, inst.problem_tokens, cfg.rollout_sampling(), rng);
  trace.views = render_views(inst, cfg.views_used, &trace.rollout);
  const std::size_t len = trace.rollout.generated.size();
  const double scale = cfg.normalize() ? 1.0 / static_cast<double>(len) : 1.0;
  for (std::size_t t = 0; t < len; ++t) {
    const auto prefix = trace.rollout.prefix(t);
    const auto cache = forward_cached(params, prefix);
    const auto p = LogDist::from_logits(cache.logits);
    std::vector<LogDist> teachers;
    teachers.reserve(trace.views.size());
    for (const auto& ctx : trace.views) teachers.push_back(teacher_eval(params, ctx, prefix));
    const ViewFamily fam(std::move(teachers));
    auto signal = pool(p, fam, cfg.epsilon, cfg.gate_override);
    const auto target = method_target(cfg.method, signal, fam);
    const auto lg = rkl_grad_logits(cache.logits, target);
    accumulate_backward(params, cache, lg.dz * scale, grads);
    trace.loss += lg.loss * scale;
    trace.rollout.steps[t].signal = std::move(signal);
  }
  return trace;
}

StepOutput train_step(const ToyLMParams& params, const std::vector<TaskInstance>& batch, const TrainConfig& cfg,
                      std::uint64_t seed) {
  if (batch.empty()) throw RejectedInput("train_step: empty batch");
  const std::size_t n = batch.size();
  std::vector<ToyLMParams> grads(n, ToyLMParams::zeros(params.config));
  std::vector<InstanceTrace> traces(n);

  auto work = [&](std::size_t i) {
    Rng rng = split_rng(seed, i);
    traces[i] = distill_instance(params, batch[i], cfg, rng, grads[i]);
  };
  const std::size_t workers = std::min(cfg.workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w) {
      pool_threads.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) work(i);
      });
    }
  }

  StepOutput out{ToyLMParams::zeros(params.config), 0.0, 0.0, 0.0, 0, {}};
  std::size_t open = 0;
  double lambda_sum = 0.0;
  const bool multi_view = cfg.views_used.size() >= 2;
  for (std::size_t i = 0; i < n; ++i) {
    out.grads += grads[i];
    out.mean_loss += traces[i].loss;
    for (const auto& st : traces[i].rollout.steps) {
      ++out.positions;
      if (!multi_view || !st.signal) continue;
      const double lam = st.signal->lambda[st.token];
      lambda_sum += lam;
      if (lam > cfg.gate_threshold) ++open;
    }
  }
  out.grads *= 1.0 / static_cast<double>(n);
  out.mean_loss /= static_cast<double>(n);
  if (multi_view && out.positions > 0) {
    out.gate_open_rate = static_cast<double>(open) / static_cast<double>(out.positions);
    out.mean_lambda = lambda_sum / static_cast<double>(out.positions);
  }
  out.traces = std::move(traces);
  return out;
}

std::vector<TaskInstance> training_batch(const TrainConfig& cfg, std::size_t step) {
  TaskConfig tc = cfg.task;
  tc.seed = SeedPlan::from(cfg.seed).train_data;
  return gen_dataset(tc, cfg.batch_size, static_cast<std::uint64_t>(step) * cfg.batch_size);
}

std::vector<TaskInstance> heldout_set(const TrainConfig& cfg) {
  TaskConfig tc = cfg.task;
  tc.seed = SeedPlan::from(cfg.seed).eval_data;
  return gen_dataset(tc, cfg.eval_instances);
}

std::uint64_t step_seed(const TrainConfig& cfg, std::size_t step) {
  return mix_seed(SeedPlan::from(cfg.seed).rollouts ^ mix_seed(step));
}

ToyLMParams random_init(const TrainConfig& cfg) {
  Rng rng(SeedPlan::from(cfg.seed).init);
  return ToyLMParams::random(cfg.model, rng);
}

double accumulate_copy_skill(const ToyLMParams& params, const TrainConfig& cfg, std::uint64_t seed,
                             std::size_t first, std::size_t count, double weight, ToyLMParams& grads) {
  const auto& pc = cfg.pretrain;
  if (pc.views.empty()) throw RejectedInput("pretrain.views must be nonempty");
  const auto vocab = cfg.task.vocabulary();
  double loss = 0.0;
  for (std::size_t b = first; b < first + count; ++b) {
    Rng rng = split_rng(seed, b);
    const auto problem = gen_instance(cfg.task, rng);
    const auto source = gen_instance(cfg.task, rng);
    const ViewKind kind = pc.views[uniform_index(rng, pc.views.size())];
    const auto ctx = render_views(source, std::span(&kind, 1)).front();
    const auto target = solution_tokens(source);
    std::vector<Token> seq(ctx);
    seq.insert(seq.end(), problem.problem_tokens.begin(), problem.problem_tokens.end());
    for (Token want : target) {
      const auto cache = forward_cached(params, seq);
      const Vec log_p = log_softmax(cache.logits);
      loss -= weight * log_p[want];
      Vec dz = log_p.array().exp().matrix();
      dz[want] -= 1.0;
      accumulate_backward(params, cache, dz * weight, grads);
      Token fed = want;
      if (vocab.value_of(want) && uniform01(rng) < pc.corrupt_prob) {
        fed = vocab.digit(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(vocab.modulus))));
      }
      seq.push_back(fed);
    }
  }
  return loss;
}

ToyLMParams base_model(const TrainConfig& cfg) {
  cfg.validate();
  auto params = random_init(cfg);
  const auto& pc = cfg.pretrain;
  if (pc.steps == 0) return params;
  const auto seed = SeedPlan::from(cfg.seed).pretrain;
  AdamState opt = AdamState::zeros(cfg.model);
  const AdamOptions adam{pc.lr, cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps};
  auto grads = ToyLMParams::zeros(cfg.model);
  for (std::size_t s = 0; s < pc.steps; ++s) {
    grads.set_zero();
    accumulate_copy_skill(params, cfg, seed, s * pc.batch_size, pc.batch_size, 1.0, grads);
    grads *= 1.0 / static_cast<double>(pc.batch_size);
    adam_step(params, grads, opt, adam);
  }
  return params;
}

double eval_avg_at_k(const RolloutSampler& sampler, const std::vector<TaskInstance>& instances, std::size_t k,
                     std::uint64_t seed) {
  if (k == 0) throw RejectedInput("eval_avg_at_k: k must be >= 1");
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = split_rng(seed, i);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < k; ++s) {
      if (verify(instances[i], sampler(instances[i], rng))) ++correct;
    }
    total += static_cast<double>(correct) / static_cast<double>(k);
  }
  return total / static_cast<double>(instances.size());
}

double eval_avg_at_k(const ToyLMParams& params, const std::vector<TaskInstance>& instances, std::size_t k,
                     const SamplingOptions& sampling, std::uint64_t seed) {
  const RolloutSampler sampler = [&](const TaskInstance& inst, Rng& rng) {
    return sample_rollout(params, inst.problem_tokens, sampling, rng).generated;
  };
  return eval_avg_at_k(sampler, instances, k, seed);
}

TrainResult train_run(const TrainConfig& cfg, TrainState state, const TrainHooks& hooks) {
  cfg.validate();
  const auto heldout = heldout_set(cfg);
  const auto eval_seed = SeedPlan::from(cfg.seed).eval_sampling;
  auto evaluate = [&](const ToyLMParams& p) {
    return eval_avg_at_k(p, heldout, cfg.eval_k, cfg.eval_sampling(), eval_seed);
  };

  TrainResult result{std::move(state), {}, 0.0};
  auto& st = result.state;
  std::optional<double> last_eval;
  while (st.step < cfg.steps) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t step = st.step;
    const auto batch = training_batch(cfg, step);
    auto out = train_step(st.params, batch, cfg, step_seed(cfg, step));
    if (cfg.pretrain.rehearsal_batch > 0) {
      const auto n = cfg.pretrain.rehearsal_batch;
      accumulate_copy_skill(st.params, cfg, SeedPlan::from(cfg.seed).rehearsal, step * n, n,
                            cfg.pretrain.rehearsal_weight / static_cast<double>(n), out.grads);
    }
    adam_step(st.params, out.grads, st.optimizer, cfg.optimizer);
    st.step = step + 1;

    StepLog log;
    log.step = st.step;
    log.mean_loss = out.mean_loss;
    log.gate_open_rate = out.gate_open_rate;
    log.mean_lambda = out.mean_lambda;
    log.positions = out.positions;
    const bool last = st.step == cfg.steps;
    if (last || (cfg.eval_every > 0 && st.step % cfg.eval_every == 0)) {
      log.eval_accuracy = evaluate(st.params);
      last_eval = log.eval_accuracy;
    }
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.on_step) hooks.on_step(log);
    result.logs.push_back(log);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(st);
    }
    if (hooks.should_stop && hooks.should_stop(st.step)) break;
  }
  result.final_accuracy = last_eval ? *last_eval : evaluate(st.params);
  return result;
}

TrainResult train_run(const TrainConfig& cfg, const TrainHooks& hooks) {
  return train_run(cfg, TrainState{base_model(cfg), AdamState::zeros(cfg.model), 0}, hooks);
}

std::vector<ScaleRow> scale_views_experiment(const TrainConfig& base, std::size_t max_views) {
  static constexpr ViewKind kOrder[] = {ViewKind::full_solution, ViewKind::partial_solution,
                                        ViewKind::final_answer, ViewKind::own_attempt_plus_reference};
  if (max_views == 0 || max_views > std::size(kOrder)) throw RejectedInput("scale: view count must be in 1..4");
  const auto initial = base_model(base);
  std::vector<ScaleRow> rows;
  for (std::size_t n = 1; n <= max_views; ++n) {
    TrainConfig cfg = base;
    cfg.views_used.assign(std::begin(kOrder), std::begin(kOrder) + static_cast<std::ptrdiff_t>(n));
    cfg.method = n == 1 ? Method::opsd : (base.method == Method::opsd ? Method::avsd : base.method);
    auto res = train_run(cfg, TrainState{initial, AdamState::zeros(cfg.model), 0});
    ScaleRow row{n, {}};
    for (const auto& log : res.logs) {
      if (log.eval_accuracy) row.checkpoints.emplace_back(log.step, *log.eval_accuracy);
    }
    if (row.checkpoints.empty()) row.checkpoints.emplace_back(0, res.final_accuracy);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace avsd
