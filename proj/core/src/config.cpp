#include "avsd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace avsd {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

std::string fmt_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<ViewKind> parse_views(const std::string& key, const std::string& v) {
  std::vector<ViewKind> out;
  try {
    for (const auto& s : split_list(v)) out.push_back(parse_view_kind(s));
  } catch (const RejectedInput& e) {
    throw ConfigError(key, e.what());
  }
  return out;
}

std::string fmt_views(const std::vector<ViewKind>& views) {
  std::string out;
  for (auto k : views) {
    if (!out.empty()) out += ',';
    out += to_string(k);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define AVSD_UINT(KEY, EXPR)                                                                                  \
  Field {                                                                                                     \
    KEY, [](RunConfig& c, const std::string& v) { c.EXPR = parse_int<std::decay_t<decltype(c.EXPR)>>(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.EXPR); }                                             \
  }
#define AVSD_REAL(KEY, EXPR)                                                          \
  Field {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { c.EXPR = parse_real(KEY, v); },     \
        [](const RunConfig& c) { return fmt_real(c.EXPR); }                           \
  }
#define AVSD_STR(KEY, EXPR) \
  Field { KEY, [](RunConfig& c, const std::string& v) { c.EXPR = v; }, [](const RunConfig& c) { return c.EXPR; } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"method",
       [](RunConfig& c, const std::string& v) {
         try {
           c.train.method = parse_method(v);
         } catch (const RejectedInput& e) {
           throw ConfigError("method", e.what());
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.method)); }},
      {"views", [](RunConfig& c, const std::string& v) { c.train.views_used = parse_views("views", v); },
       [](const RunConfig& c) { return fmt_views(c.train.views_used); }},
      AVSD_UINT("seed", train.seed),
      AVSD_UINT("train.steps", train.steps),
      AVSD_UINT("train.batch_size", train.batch_size),
      AVSD_REAL("train.rollout_temperature", train.rollout_temperature),
      AVSD_UINT("train.max_len", train.max_len),
      AVSD_REAL("train.epsilon", train.epsilon),
      {"train.normalize_by_length",
       [](RunConfig& c, const std::string& v) {
         if (v == "auto") {
           c.train.normalize_by_length.reset();
         } else {
           c.train.normalize_by_length = parse_bool("train.normalize_by_length", v);
         }
       },
       [](const RunConfig& c) {
         return c.train.normalize_by_length ? std::string(*c.train.normalize_by_length ? "true" : "false")
                                            : std::string("auto");
       }},
      {"train.gate_override",
       [](RunConfig& c, const std::string& v) {
         if (v == "none") c.train.gate_override = GateOverride::none;
         else if (v == "closed") c.train.gate_override = GateOverride::closed;
         else if (v == "open") c.train.gate_override = GateOverride::open;
         else throw ConfigError("train.gate_override", "expected none/closed/open, got '" + v + "'");
       },
       [](const RunConfig& c) {
         switch (c.train.gate_override) {
           case GateOverride::closed: return std::string("closed");
           case GateOverride::open: return std::string("open");
           default: return std::string("none");
         }
       }},
      AVSD_UINT("train.checkpoint_every", train.checkpoint_every),
      AVSD_UINT("train.workers", train.workers),
      AVSD_REAL("optim.lr", train.optimizer.lr),
      AVSD_REAL("optim.beta1", train.optimizer.beta1),
      AVSD_REAL("optim.beta2", train.optimizer.beta2),
      AVSD_REAL("optim.eps", train.optimizer.eps),
      AVSD_UINT("eval.every", train.eval_every),
      AVSD_UINT("eval.k", train.eval_k),
      AVSD_UINT("eval.instances", train.eval_instances),
      AVSD_REAL("eval.temperature", train.eval_temperature),
      AVSD_REAL("analysis.gate_threshold", train.gate_threshold),
      AVSD_UINT("analysis.top_k", credit_top_k),
      {"task.modulus",
       [](RunConfig& c, const std::string& v) { c.train.task.modulus = parse_int<int>("task.modulus", v); },
       [](const RunConfig& c) { return std::to_string(c.train.task.modulus); }},
      {"task.chain_length",
       [](RunConfig& c, const std::string& v) { c.train.task.chain_length = parse_int<int>("task.chain_length", v); },
       [](const RunConfig& c) { return std::to_string(c.train.task.chain_length); }},
      {"task.operators",
       [](RunConfig& c, const std::string& v) {
         c.train.task.operators.clear();
         try {
           for (const auto& s : split_list(v)) c.train.task.operators.push_back(parse_op(s));
         } catch (const RejectedInput& e) {
           throw ConfigError("task.operators", e.what());
         }
       },
       [](const RunConfig& c) {
         std::string out;
         for (auto op : c.train.task.operators) {
           if (!out.empty()) out += ',';
           out += to_string(op);
         }
         return out;
       }},
      AVSD_REAL("task.partial_fraction", train.task.partial_fraction),
      AVSD_UINT("model.vocab", train.model.vocab),
      AVSD_UINT("model.embed_dim", train.model.embed_dim),
      AVSD_UINT("model.hidden", train.model.hidden),
      AVSD_UINT("model.window", train.model.window),
      AVSD_UINT("pretrain.steps", train.pretrain.steps),
      AVSD_UINT("pretrain.batch_size", train.pretrain.batch_size),
      AVSD_REAL("pretrain.lr", train.pretrain.lr),
      AVSD_REAL("pretrain.corrupt_prob", train.pretrain.corrupt_prob),
      {"pretrain.views",
       [](RunConfig& c, const std::string& v) { c.train.pretrain.views = parse_views("pretrain.views", v); },
       [](const RunConfig& c) { return fmt_views(c.train.pretrain.views); }},
      AVSD_UINT("pretrain.rehearsal_batch", train.pretrain.rehearsal_batch),
      AVSD_REAL("pretrain.rehearsal_weight", train.pretrain.rehearsal_weight),
      AVSD_UINT("data.count", data_count),
      AVSD_UINT("data.first_id", data_first_id),
      AVSD_STR("io.checkpoint", checkpoint_path),
      AVSD_STR("io.metrics", metrics_path),
      AVSD_STR("io.resume", resume_path),
  };
  return table;
}

#undef AVSD_UINT
#undef AVSD_REAL
#undef AVSD_STR

// Maps a validation message from the core library back to a config key.
std::string field_of(const std::string& msg) {
  for (const auto& f : fields()) {
    const std::string key = f.key;
    if (msg.rfind(key, 0) == 0) return key;
  }
  if (msg.rfind("train.epsilon", 0) == 0) return "train.epsilon";
  return {};
}

}  // namespace

KeyValues parse_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot open config file " + path.string());
  return parse_key_values(is);
}

RunConfig run_config_from(const KeyValues& kv, bool apply_env) {
  RunConfig cfg;
  bool vocab_given = false;
  for (const auto& [key, value] : kv) {
    const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
    if (it == fields().end()) throw ConfigError(key, "unknown key");
    it->set(cfg, value);
    vocab_given = vocab_given || key == "model.vocab";
  }
  if (apply_env) {
    if (const char* env = std::getenv("AVSD_SEED"); env != nullptr && *env != '\0') {
      cfg.train.seed = parse_int<std::uint64_t>("AVSD_SEED", env);
    }
  }
  // The vocabulary follows the task unless pinned explicitly.
  if (!vocab_given && cfg.train.task.modulus > 0) cfg.train.model.vocab = cfg.train.task.vocabulary().size();
  try {
    cfg.train.validate();
  } catch (const RejectedInput& e) {
    throw ConfigError(field_of(e.what()), e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, bool apply_env) {
  return run_config_from(path ? read_key_values(*path) : KeyValues{}, apply_env);
}

KeyValues to_key_values(const RunConfig& cfg) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.get(cfg);
  return kv;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

}  // namespace avsd
