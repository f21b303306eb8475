#include "avsd/toy_lm.hpp"

#include <cmath>
#include <string>

namespace avsd {

void ToyLMConfig::validate() const {
  if (vocab < 2) throw RejectedInput("model.vocab must be >= 2");
  if (embed_dim == 0) throw RejectedInput("model.embed_dim must be positive");
  if (hidden == 0) throw RejectedInput("model.hidden must be positive");
  if (window == 0) throw RejectedInput("model.window must be positive");
}

ToyLMParams ToyLMParams::zeros(const ToyLMConfig& cfg) {
  cfg.validate();
  const auto v = static_cast<Eigen::Index>(cfg.vocab);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto h = static_cast<Eigen::Index>(cfg.hidden);
  const auto w = static_cast<Eigen::Index>(cfg.window);
  return ToyLMParams{cfg,
                     Mat::Zero(v, d),
                     Mat::Zero(w * d, h),
                     Vec::Zero(h),
                     Mat::Zero(d, h),
                     Mat::Zero(h, v),
                     Vec::Zero(v)};
}

ToyLMParams ToyLMParams::random(const ToyLMConfig& cfg, Rng& rng, double scale) {
  auto p = zeros(cfg);
  for (auto block : p.blocks()) {
    for (double& x : block) x = (2.0 * uniform01(rng) - 1.0) * scale;
  }
  return p;
}

namespace {

template <class Derived>
auto as_span(Derived& m) {
  return std::span<double>(m.data(), static_cast<std::size_t>(m.size()));
}

template <class Derived>
auto as_const_span(const Derived& m) {
  return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
}

}  // namespace

std::array<std::span<double>, kParamBlockCount> ToyLMParams::blocks() {
  return {as_span(embed), as_span(w_window), as_span(b_window),
          as_span(w_summary), as_span(w_out), as_span(b_out)};
}

std::array<std::span<const double>, kParamBlockCount> ToyLMParams::blocks() const {
  return {as_const_span(embed), as_const_span(w_window), as_const_span(b_window),
          as_const_span(w_summary), as_const_span(w_out), as_const_span(b_out)};
}

std::size_t ToyLMParams::parameter_count() const {
  std::size_t n = 0;
  for (auto b : blocks()) n += b.size();
  return n;
}

void ToyLMParams::set_zero() {
  for (auto b : blocks()) std::fill(b.begin(), b.end(), 0.0);
}

ToyLMParams& ToyLMParams::operator+=(const ToyLMParams& other) {
  if (!(config == other.config)) throw RejectedInput("parameter shape mismatch");
  embed += other.embed;
  w_window += other.w_window;
  b_window += other.b_window;
  w_summary += other.w_summary;
  w_out += other.w_out;
  b_out += other.b_out;
  return *this;
}

ToyLMParams& ToyLMParams::operator*=(double s) {
  for (auto b : blocks()) {
    for (double& x : b) x *= s;
  }
  return *this;
}

const char* block_name(std::size_t i) {
  static constexpr const char* kNames[kParamBlockCount] = {"embed", "w_window", "b_window",
                                                           "w_summary", "w_out", "b_out"};
  return i < kParamBlockCount ? kNames[i] : "?";
}

ForwardCache forward_cached(const ToyLMParams& params, std::span<const Token> prefix) {
  const auto& cfg = params.config;
  if (prefix.empty()) throw RejectedInput("forward: empty prefix");
  for (Token t : prefix) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab) {
      throw RejectedInput("forward: token " + std::to_string(t) + " outside vocabulary of size " +
                          std::to_string(cfg.vocab));
    }
  }
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const std::size_t w = cfg.window;

  ForwardCache c;
  c.prefix.assign(prefix.begin(), prefix.end());
  c.window_tokens.assign(w, kBos);
  const std::size_t n = prefix.size();
  for (std::size_t s = 0; s < w; ++s) {
    // slot w-1 holds the most recent token
    const std::size_t back = w - 1 - s;
    if (back < n) c.window_tokens[s] = prefix[n - 1 - back];
  }
  c.window_input.resize(static_cast<Eigen::Index>(w) * d);
  for (std::size_t s = 0; s < w; ++s) {
    c.window_input.segment(static_cast<Eigen::Index>(s) * d, d) =
        params.embed.row(c.window_tokens[s]).transpose();
  }
  c.summary = Vec::Zero(d);
  for (Token t : prefix) c.summary += params.embed.row(t).transpose();
  c.summary /= static_cast<double>(n);

  Vec pre = params.b_window;
  pre.noalias() += params.w_window.transpose() * c.window_input;
  pre.noalias() += params.w_summary.transpose() * c.summary;
  c.hidden = pre.array().tanh().matrix();
  c.logits = params.b_out;
  c.logits.noalias() += params.w_out.transpose() * c.hidden;
  return c;
}

LogitsRow forward(const ToyLMParams& params, std::span<const Token> prefix) {
  return forward_cached(params, prefix).logits;
}

void accumulate_backward(const ToyLMParams& params, const ForwardCache& cache, const Vec& dz,
                         ToyLMParams& grads) {
  const auto& cfg = params.config;
  if (static_cast<std::size_t>(dz.size()) != cfg.vocab) throw RejectedInput("backward: dz size mismatch");
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);

  grads.b_out += dz;
  grads.w_out.noalias() += cache.hidden * dz.transpose();
  const Vec dhidden = params.w_out * dz;
  const Vec dpre = dhidden.cwiseProduct((1.0 - cache.hidden.array().square()).matrix());
  grads.b_window += dpre;
  grads.w_window.noalias() += cache.window_input * dpre.transpose();
  grads.w_summary.noalias() += cache.summary * dpre.transpose();

  const Vec dwindow = params.w_window * dpre;
  for (std::size_t s = 0; s < cache.window_tokens.size(); ++s) {
    grads.embed.row(cache.window_tokens[s]) +=
        dwindow.segment(static_cast<Eigen::Index>(s) * d, d).transpose();
  }
  const Vec dsummary = params.w_summary * dpre / static_cast<double>(cache.prefix.size());
  for (Token t : cache.prefix) grads.embed.row(t) += dsummary.transpose();
}

ToyLMParams backward(const ToyLMParams& params, std::span<const Token> prefix, const Vec& dz) {
  auto grads = ToyLMParams::zeros(params.config);
  accumulate_backward(params, forward_cached(params, prefix), dz, grads);
  return grads;
}

std::vector<Token> Rollout::prefix(std::size_t t) const {
  std::vector<Token> out(prompt);
  out.insert(out.end(), generated.begin(), generated.begin() + static_cast<std::ptrdiff_t>(t));
  return out;
}

Token sample_token(const LogitsRow& logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw RejectedInput("sampling temperature must be positive");
  Eigen::Index best = 0;
  if (temperature < kGreedyTemperature) {
    logits.maxCoeff(&best);
    return static_cast<Token>(best);
  }
  const Vec probs = log_softmax(logits / temperature).array().exp().matrix();
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index v = 0; v < probs.size(); ++v) {
    acc += probs[v];
    if (u < acc) return static_cast<Token>(v);
  }
  // u landed in the rounding gap above the cumulative sum
  probs.maxCoeff(&best);
  return static_cast<Token>(best);
}

Rollout sample_rollout(const ToyLMParams& params, std::span<const Token> prompt,
                       const SamplingOptions& opts, Rng& rng) {
  Rollout r;
  r.prompt.assign(prompt.begin(), prompt.end());
  std::vector<Token> prefix(prompt.begin(), prompt.end());
  for (std::size_t t = 0; t < opts.max_len; ++t) {
    LogitsRow z = forward(params, prefix);
    const Token tok = sample_token(z, opts.temperature, rng);
    r.generated.push_back(tok);
    r.steps.push_back(RolloutStep{std::move(z), tok, std::nullopt});
    prefix.push_back(tok);
    if (tok == opts.terminator) break;
  }
  return r;
}

LogDist teacher_eval(const ToyLMParams& params, std::span<const Token> view_context,
                     std::span<const Token> prefix) {
  std::vector<Token> full;
  full.reserve(view_context.size() + prefix.size());
  full.insert(full.end(), view_context.begin(), view_context.end());
  full.insert(full.end(), prefix.begin(), prefix.end());
  return LogDist::from_logits(forward(params, full));
}

AdamState AdamState::zeros(const ToyLMConfig& cfg) {
  return AdamState{ToyLMParams::zeros(cfg), ToyLMParams::zeros(cfg), 0};
}

void adam_step(ToyLMParams& params, const ToyLMParams& grads, AdamState& state, const AdamOptions& opts) {
  if (!(params.config == grads.config) || !(params.config == state.m.config)) {
    throw RejectedInput("adam_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.t));
  auto pb = params.blocks();
  const auto gb = grads.blocks();
  auto mb = state.m.blocks();
  auto vb = state.v.blocks();
  for (std::size_t b = 0; b < kParamBlockCount; ++b) {
    for (std::size_t i = 0; i < pb[b].size(); ++i) {
      const double g = gb[b][i];
      mb[b][i] = opts.beta1 * mb[b][i] + (1.0 - opts.beta1) * g;
      vb[b][i] = opts.beta2 * vb[b][i] + (1.0 - opts.beta2) * g * g;
      const double mhat = mb[b][i] / bc1;
      const double vhat = vb[b][i] / bc2;
      pb[b][i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

}  // namespace avsd
