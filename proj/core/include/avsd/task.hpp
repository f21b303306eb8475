#pragma once

// Synthetic modular-arithmetic chains with privileged solution views.
//
// Student prompt:   BOS a1 op1 a2 ... op(L-1) aL ?
// Expected output:  c1 ; c2 ; ... ; cL = ans END
// where c1 = a1, c(i+1) = ci op(i) a(i+1) mod m, evaluated left to right,
// and ans = cL. A view context is [marker] body [|] and is prepended to the
// student prefix when the teacher is evaluated.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avsd/rng.hpp"
#include "avsd/toy_lm.hpp"

namespace avsd {

enum class Op { add, sub, mul };
enum class ViewKind { full_solution, partial_solution, final_answer, own_attempt_plus_reference };

std::string_view to_string(Op op);
std::string_view to_string(ViewKind kind);
Op parse_op(std::string_view s);
ViewKind parse_view_kind(std::string_view s);

/// Token layout: fixed specials then one digit token per residue.
struct Vocabulary {
  static constexpr Token kBos = avsd::kBos;
  static constexpr Token kEnd = 1;
  static constexpr Token kEq = 2;
  static constexpr Token kStep = 3;
  static constexpr Token kSep = 4;
  static constexpr Token kQuery = 5;
  static constexpr Token kAdd = 6;
  static constexpr Token kSub = 7;
  static constexpr Token kMul = 8;
  static constexpr Token kMarkFull = 9;
  static constexpr Token kMarkPartial = 10;
  static constexpr Token kMarkAnswer = 11;
  static constexpr Token kMarkAttempt = 12;
  static constexpr Token kFirstDigit = 13;

  int modulus = 7;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(kFirstDigit + modulus); }
  [[nodiscard]] Token digit(int residue) const;
  [[nodiscard]] std::optional<int> value_of(Token t) const;
  [[nodiscard]] static Token op_token(Op op);
  [[nodiscard]] static Token marker(ViewKind kind);
  [[nodiscard]] static bool is_marker(Token t) { return t >= kMarkFull && t <= kMarkAttempt; }
  [[nodiscard]] std::string render(std::span<const Token> tokens) const;
};

struct TaskConfig {
  int modulus = 7;
  int chain_length = 3;
  std::vector<Op> operators{Op::add, Op::sub, Op::mul};
  double partial_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] Vocabulary vocabulary() const { return Vocabulary{modulus}; }
};

struct View {
  ViewKind kind;
  std::vector<Token> tokens;  // body only, no marker/separator
};

struct TaskInstance {
  std::uint64_t id = 0;
  int modulus = 7;
  std::vector<int> operands;
  std::vector<Op> ops;
  std::vector<int> chain;  // running values; chain.back() is the answer
  std::vector<Token> problem_tokens;
  std::vector<Token> answer_tokens;
  std::vector<View> views;  // full, partial, final answer

  [[nodiscard]] Vocabulary vocabulary() const { return Vocabulary{modulus}; }
  [[nodiscard]] const View& view(ViewKind kind) const;
};

int apply_op(Op op, int lhs, int rhs, int modulus);

/// Number of chain steps kept by the partial view: floor(fraction * L),
/// clamped to [1, L-1] so the view is nonempty and strictly partial.
int partial_step_count(const TaskConfig& cfg);

TaskInstance gen_instance(const TaskConfig& cfg, Rng& rng, std::uint64_t id = 0);

/// Instance i drawn from split_rng(cfg.seed, i); order-independent.
std::vector<TaskInstance> gen_dataset(const TaskConfig& cfg, std::size_t count, std::uint64_t first_id = 0);

/// The token sequence a correct student emits (including the terminator).
std::vector<Token> solution_tokens(const TaskInstance& inst);

/// Full-solution body tokens: c1 ; c2 ; ... ; cL = ans
std::vector<Token> full_solution_body(const TaskInstance& inst);

using ViewContext = std::vector<Token>;

/// One teacher context per requested kind, in request order:
/// [marker] body [|]. own_attempt_plus_reference needs the student rollout
/// (its generated tokens followed by the full solution body).
std::vector<ViewContext> render_views(const TaskInstance& inst, std::span<const ViewKind> which,
                                      const Rollout* student_rollout = nullptr);

/// True iff `generated` ends with the terminator and the tokens between the
/// last '=' and the terminator equal the answer tokens.
bool verify(const TaskInstance& inst, std::span<const Token> generated);
bool verify(const TaskInstance& inst, const Rollout& rollout);

std::size_t default_max_len(const TaskConfig& cfg);

}  // namespace avsd
