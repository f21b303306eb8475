#pragma once

// Tiny autoregressive model: a windowed MLP over the last W token embeddings
// plus a mean-of-prefix summary path, with hand-written backprop. The same
// parameters serve as student (no context) and teacher (view context
// prepended, output treated as constant).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "avsd/log_dist.hpp"
#include "avsd/rkl.hpp"
#include "avsd/rng.hpp"
#include "avsd/signal.hpp"

namespace avsd {

using Token = std::int32_t;
inline constexpr Token kBos = 0;

struct ToyLMConfig {
  std::size_t vocab = 20;
  std::size_t embed_dim = 16;
  std::size_t hidden = 64;
  std::size_t window = 8;

  void validate() const;
  friend bool operator==(const ToyLMConfig&, const ToyLMConfig&) = default;
};

inline constexpr std::size_t kParamBlockCount = 6;

/// Parameter set, also used for gradients and optimizer moments.
/// Blocks are row-major and listed in declaration order by blocks().
struct ToyLMParams {
  ToyLMConfig config;
  Mat embed;      // |V| x d
  Mat w_window;   // (W*d) x H
  Vec b_window;   // H
  Mat w_summary;  // d x H
  Mat w_out;      // H x |V|
  Vec b_out;      // |V|

  static ToyLMParams zeros(const ToyLMConfig& cfg);
  /// Entries uniform in (-scale, scale).
  static ToyLMParams random(const ToyLMConfig& cfg, Rng& rng, double scale = 0.08);

  [[nodiscard]] std::array<std::span<double>, kParamBlockCount> blocks();
  [[nodiscard]] std::array<std::span<const double>, kParamBlockCount> blocks() const;
  [[nodiscard]] std::size_t parameter_count() const;

  void set_zero();
  ToyLMParams& operator+=(const ToyLMParams& other);
  ToyLMParams& operator*=(double s);
};

const char* block_name(std::size_t i);

/// Intermediate values of one forward pass, kept for backward.
struct ForwardCache {
  std::vector<Token> window_tokens;  // W entries, BOS-padded on the left
  std::vector<Token> prefix;
  Vec window_input;  // W*d
  Vec summary;       // d
  Vec hidden;        // H (post-tanh)
  LogitsRow logits;
};

LogitsRow forward(const ToyLMParams& params, std::span<const Token> prefix);
ForwardCache forward_cached(const ToyLMParams& params, std::span<const Token> prefix);

/// Accumulates d(z . dz)/d(params) into `grads`.
void accumulate_backward(const ToyLMParams& params, const ForwardCache& cache, const Vec& dz,
                         ToyLMParams& grads);

/// Gradient of z(params, prefix) . dz with respect to every parameter.
ToyLMParams backward(const ToyLMParams& params, std::span<const Token> prefix, const Vec& dz);

struct RolloutStep {
  LogitsRow logits;
  Token token = 0;
  std::optional<PooledSignal> signal;
};

struct Rollout {
  std::vector<Token> prompt;
  std::vector<Token> generated;
  std::vector<RolloutStep> steps;

  /// prompt ++ generated[0..t)
  [[nodiscard]] std::vector<Token> prefix(std::size_t t) const;
};

struct SamplingOptions {
  double temperature = 0.7;
  std::size_t max_len = 16;
  Token terminator = 1;
};

/// Temperatures below this are treated as greedy decoding.
inline constexpr double kGreedyTemperature = 1e-6;

Token sample_token(const LogitsRow& logits, double temperature, Rng& rng);

Rollout sample_rollout(const ToyLMParams& params, std::span<const Token> prompt,
                       const SamplingOptions& opts, Rng& rng);

/// softmax(forward(view_context ++ prefix)); a plain value, never a gradient path.
LogDist teacher_eval(const ToyLMParams& params, std::span<const Token> view_context,
                     std::span<const Token> prefix);

struct AdamOptions {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ToyLMParams m;
  ToyLMParams v;
  std::int64_t t = 0;

  static AdamState zeros(const ToyLMConfig& cfg);
};

void adam_step(ToyLMParams& params, const ToyLMParams& grads, AdamState& state, const AdamOptions& opts);

}  // namespace avsd
