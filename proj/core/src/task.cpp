#include "avsd/task.hpp"

#include <algorithm>
#include <cmath>

namespace avsd {

std::string_view to_string(Op op) {
  switch (op) {
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
  }
  return "?";
}

std::string_view to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::full_solution: return "full_solution";
    case ViewKind::partial_solution: return "partial_solution";
    case ViewKind::final_answer: return "final_answer";
    case ViewKind::own_attempt_plus_reference: return "own_attempt_plus_reference";
  }
  return "?";
}

Op parse_op(std::string_view s) {
  if (s == "add") return Op::add;
  if (s == "sub") return Op::sub;
  if (s == "mul") return Op::mul;
  throw RejectedInput("unknown operator '" + std::string(s) + "'");
}

ViewKind parse_view_kind(std::string_view s) {
  if (s == "full_solution" || s == "full") return ViewKind::full_solution;
  if (s == "partial_solution" || s == "partial") return ViewKind::partial_solution;
  if (s == "final_answer" || s == "answer") return ViewKind::final_answer;
  if (s == "own_attempt_plus_reference" || s == "attempt") return ViewKind::own_attempt_plus_reference;
  throw RejectedInput("unknown view kind '" + std::string(s) + "'");
}

Token Vocabulary::digit(int residue) const {
  if (residue < 0 || residue >= modulus) throw RejectedInput("residue out of range");
  return static_cast<Token>(kFirstDigit + residue);
}

std::optional<int> Vocabulary::value_of(Token t) const {
  if (t >= kFirstDigit && t < kFirstDigit + modulus) return t - kFirstDigit;
  return std::nullopt;
}

Token Vocabulary::op_token(Op op) {
  switch (op) {
    case Op::add: return kAdd;
    case Op::sub: return kSub;
    case Op::mul: return kMul;
  }
  return kAdd;
}

Token Vocabulary::marker(ViewKind kind) {
  switch (kind) {
    case ViewKind::full_solution: return kMarkFull;
    case ViewKind::partial_solution: return kMarkPartial;
    case ViewKind::final_answer: return kMarkAnswer;
    case ViewKind::own_attempt_plus_reference: return kMarkAttempt;
  }
  return kMarkFull;
}

std::string Vocabulary::render(std::span<const Token> tokens) const {
  static constexpr const char* kSpecial[] = {"<s>", "</s>", "=", ";", "|", "?", "+", "-", "*",
                                             "[FULL]", "[PART]", "[ANS]", "[TRY]"};
  std::string out;
  for (Token t : tokens) {
    if (!out.empty()) out += ' ';
    if (t >= 0 && t < kFirstDigit) {
      out += kSpecial[t];
    } else if (auto v = value_of(t)) {
      out += std::to_string(*v);
    } else {
      out += "<" + std::to_string(t) + ">";
    }
  }
  return out;
}

void TaskConfig::validate() const {
  if (modulus < 5) throw RejectedInput("task.modulus must be >= 5 (got " + std::to_string(modulus) + ")");
  if (chain_length < 2) {
    throw RejectedInput("task.chain_length must be >= 2 (got " + std::to_string(chain_length) + ")");
  }
  if (operators.empty()) throw RejectedInput("task.operators must be nonempty");
  if (!(partial_fraction > 0.0 && partial_fraction < 1.0)) {
    throw RejectedInput("task.partial_fraction must lie in (0, 1)");
  }
}

const View& TaskInstance::view(ViewKind kind) const {
  for (const auto& v : views) {
    if (v.kind == kind) return v;
  }
  throw RejectedInput("instance has no " + std::string(to_string(kind)) + " view");
}

int apply_op(Op op, int lhs, int rhs, int modulus) {
  long r = 0;
  switch (op) {
    case Op::add: r = static_cast<long>(lhs) + rhs; break;
    case Op::sub: r = static_cast<long>(lhs) - rhs; break;
    case Op::mul: r = static_cast<long>(lhs) * rhs; break;
  }
  r %= modulus;
  if (r < 0) r += modulus;
  return static_cast<int>(r);
}

int partial_step_count(const TaskConfig& cfg) {
  const int k = static_cast<int>(std::floor(cfg.partial_fraction * cfg.chain_length));
  return std::clamp(k, 1, cfg.chain_length - 1);
}

std::vector<Token> full_solution_body(const TaskInstance& inst) {
  const auto vocab = inst.vocabulary();
  std::vector<Token> body;
  for (std::size_t i = 0; i < inst.chain.size(); ++i) {
    if (i > 0) body.push_back(Vocabulary::kStep);
    body.push_back(vocab.digit(inst.chain[i]));
  }
  body.push_back(Vocabulary::kEq);
  body.insert(body.end(), inst.answer_tokens.begin(), inst.answer_tokens.end());
  return body;
}

TaskInstance gen_instance(const TaskConfig& cfg, Rng& rng, std::uint64_t id) {
  cfg.validate();
  const auto vocab = cfg.vocabulary();
  TaskInstance inst;
  inst.id = id;
  inst.modulus = cfg.modulus;
  const auto L = static_cast<std::size_t>(cfg.chain_length);
  for (std::size_t i = 0; i < L; ++i) {
    inst.operands.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.modulus))));
  }
  for (std::size_t i = 0; i + 1 < L; ++i) {
    inst.ops.push_back(cfg.operators[uniform_index(rng, cfg.operators.size())]);
  }
  inst.chain.push_back(inst.operands[0]);
  for (std::size_t i = 1; i < L; ++i) {
    inst.chain.push_back(apply_op(inst.ops[i - 1], inst.chain.back(), inst.operands[i], cfg.modulus));
  }

  inst.problem_tokens.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < L; ++i) {
    if (i > 0) inst.problem_tokens.push_back(Vocabulary::op_token(inst.ops[i - 1]));
    inst.problem_tokens.push_back(vocab.digit(inst.operands[i]));
  }
  inst.problem_tokens.push_back(Vocabulary::kQuery);
  inst.answer_tokens = {vocab.digit(inst.chain.back())};

  auto full = full_solution_body(inst);
  const auto kept = static_cast<std::size_t>(partial_step_count(cfg));
  // k steps occupy the first 2k-1 body tokens (digits interleaved with ';').
  std::vector<Token> partial(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(2 * kept - 1));
  inst.views = {View{ViewKind::full_solution, std::move(full)},
                View{ViewKind::partial_solution, std::move(partial)},
                View{ViewKind::final_answer, inst.answer_tokens}};
  return inst;
}

std::vector<TaskInstance> gen_dataset(const TaskConfig& cfg, std::size_t count, std::uint64_t first_id) {
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto id = first_id + i;
    Rng rng = split_rng(cfg.seed, id);
    out.push_back(gen_instance(cfg, rng, id));
  }
  return out;
}

std::vector<Token> solution_tokens(const TaskInstance& inst) {
  auto out = full_solution_body(inst);
  out.push_back(Vocabulary::kEnd);
  return out;
}

std::vector<ViewContext> render_views(const TaskInstance& inst, std::span<const ViewKind> which,
                                      const Rollout* student_rollout) {
  std::vector<ViewContext> out;
  out.reserve(which.size());
  for (ViewKind kind : which) {
    ViewContext ctx{Vocabulary::marker(kind)};
    if (kind == ViewKind::own_attempt_plus_reference) {
      if (student_rollout == nullptr) {
        throw RejectedInput("own_attempt_plus_reference view requires the student rollout");
      }
      ctx.insert(ctx.end(), student_rollout->generated.begin(), student_rollout->generated.end());
      ctx.push_back(Vocabulary::kSep);
      const auto body = full_solution_body(inst);
      ctx.insert(ctx.end(), body.begin(), body.end());
    } else {
      const auto& body = inst.view(kind).tokens;
      ctx.insert(ctx.end(), body.begin(), body.end());
    }
    ctx.push_back(Vocabulary::kSep);
    out.push_back(std::move(ctx));
  }
  return out;
}

bool verify(const TaskInstance& inst, std::span<const Token> generated) {
  if (generated.empty() || generated.back() != Vocabulary::kEnd) return false;
  const auto body = generated.first(generated.size() - 1);
  const auto eq = std::find(body.rbegin(), body.rend(), Vocabulary::kEq);
  if (eq == body.rend()) return false;
  const auto answer_begin = eq.base();
  return std::equal(answer_begin, body.end(), inst.answer_tokens.begin(), inst.answer_tokens.end());
}

bool verify(const TaskInstance& inst, const Rollout& rollout) { return verify(inst, rollout.generated); }

std::size_t default_max_len(const TaskConfig& cfg) {
  // c1 ; ... ; cL = ans END is 2L + 2 tokens; leave two tokens of slack.
  return static_cast<std::size_t>(2 * cfg.chain_length + 4);
}

}  // namespace avsd
