#include "avsd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace avsd {

CreditReport credit_report(std::uint64_t rollout_id, std::span<const Token> tokens,
                           std::span<const double> advantages, std::size_t k) {
  if (tokens.size() != advantages.size()) throw RejectedInput("credit_report: tokens and advantages differ in length");
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(advantages[a]) > std::abs(advantages[b]);
  });
  order.resize(std::min(k, order.size()));

  CreditReport rep;
  rep.rollout_id = rollout_id;
  std::size_t wrong = 0;
  for (std::size_t pos : order) {
    const double a = advantages[pos];
    const int sign = a > 0.0 ? 1 : (a < 0.0 ? -1 : 0);
    if (sign > 0) ++wrong;
    rep.top.push_back(CreditEntry{pos, tokens[pos], a, sign});
  }
  rep.fraction_wrong_sign = rep.top.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(rep.top.size());
  return rep;
}

CreditAggregate aggregate_credit(std::span<const CreditReport> reports) {
  CreditAggregate agg;
  agg.rollouts = reports.size();
  agg.no_incorrect_rollouts = reports.empty();
  for (const auto& r : reports) {
    agg.positions += r.top.size();
    for (const auto& e : r.top) agg.wrong_sign += e.sign > 0 ? 1 : 0;
  }
  if (agg.positions > 0) {
    agg.fraction_wrong_sign = static_cast<double>(agg.wrong_sign) / static_cast<double>(agg.positions);
  }
  return agg;
}

std::vector<PooledSignal> score_rollout(const ToyLMParams& params, const TaskInstance& inst,
                                        std::span<const ViewKind> views, const Rollout& rollout,
                                        double epsilon, GateOverride override_gate) {
  const auto contexts = render_views(inst, views, &rollout);
  std::vector<PooledSignal> out;
  out.reserve(rollout.generated.size());
  for (std::size_t t = 0; t < rollout.generated.size(); ++t) {
    const auto prefix = rollout.prefix(t);
    const auto p = LogDist::from_logits(forward(params, prefix));
    std::vector<LogDist> teachers;
    for (const auto& ctx : contexts) teachers.push_back(teacher_eval(params, ctx, prefix));
    out.push_back(pool(p, ViewFamily(std::move(teachers)), epsilon, override_gate));
  }
  return out;
}

CreditAnalysis analyze_credit(const ToyLMParams& params, const std::vector<TaskInstance>& instances,
                              const TrainConfig& cfg, std::size_t k, std::uint64_t seed) {
  if (cfg.views_used.size() < 2) throw RejectedInput("analyze-credit needs at least 2 views");
  const auto full = std::find(cfg.views_used.begin(), cfg.views_used.end(), ViewKind::full_solution);
  const std::size_t single = full == cfg.views_used.end() ? 0 : static_cast<std::size_t>(full - cfg.views_used.begin());

  CreditAnalysis res;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = split_rng(seed, i);
    const auto rollout = sample_rollout(params, instances[i].problem_tokens, cfg.rollout_sampling(), rng);
    ++res.sampled;
    if (verify(instances[i], rollout)) continue;
    const auto signals = score_rollout(params, instances[i], cfg.views_used, rollout, cfg.epsilon);
    std::vector<double> a_hat;
    std::vector<double> single_view;
    for (std::size_t t = 0; t < signals.size(); ++t) {
      const Token tok = rollout.generated[t];
      a_hat.push_back(signals[t].a_hat[tok]);
      single_view.push_back(signals[t].delta(static_cast<Eigen::Index>(single), tok));
    }
    res.avsd.push_back(credit_report(instances[i].id, rollout.generated, a_hat, k));
    res.opsd.push_back(credit_report(instances[i].id, rollout.generated, single_view, k));
  }
  res.avsd_total = aggregate_credit(res.avsd);
  res.opsd_total = aggregate_credit(res.opsd);
  return res;
}

GateReport gate_report(std::span<const double> lambdas, double threshold) {
  GateReport rep;
  rep.threshold = threshold;
  rep.positions = lambdas.size();
  std::size_t open = 0;
  double sum = 0.0;
  for (double lam : lambdas) {
    if (lam > threshold) ++open;
    sum += lam;
    const auto bin = std::min(kGateBins - 1, static_cast<std::size_t>(std::max(0.0, lam) * kGateBins));
    ++rep.histogram[bin];
  }
  if (!lambdas.empty()) {
    rep.open_rate = static_cast<double>(open) / static_cast<double>(lambdas.size());
    rep.mean_lambda = sum / static_cast<double>(lambdas.size());
  }
  return rep;
}

GateReport analyze_gate(const ToyLMParams& params, const std::vector<TaskInstance>& instances,
                        const TrainConfig& cfg, double threshold, std::uint64_t seed) {
  if (cfg.views_used.size() < 2) throw RejectedInput("analyze-gate needs at least 2 views");
  std::vector<double> lambdas;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = split_rng(seed, i);
    const auto rollout = sample_rollout(params, instances[i].problem_tokens, cfg.rollout_sampling(), rng);
    const auto signals = score_rollout(params, instances[i], cfg.views_used, rollout, cfg.epsilon);
    for (std::size_t t = 0; t < signals.size(); ++t) lambdas.push_back(signals[t].lambda[rollout.generated[t]]);
  }
  return gate_report(lambdas, threshold);
}

}  // namespace avsd
