#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "avsd/analysis.hpp"
#include "avsd/checkpoint.hpp"
#include "avsd/config.hpp"
#include "avsd/dataset_io.hpp"
#include "avsd/pool_io.hpp"
#include "avsd/trainer.hpp"

namespace avsd::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to --out when given, else to the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback, std::ios::openmode mode = std::ios::trunc) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::out | mode);
    if (!*file_) throw RuntimeFailure("cannot open for writing: " + path);
    os_ = file_.get();
  }
  std::ostream& operator*() { return *os_; }
  void line(const Json& j) {
    *os_ << j.dump() << '\n';
    os_->flush();
    if (!*os_) throw RuntimeFailure("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

RunConfig load(const Globals& g) {
  auto kv = g.config.empty() ? KeyValues{} : read_key_values(g.config);
  // --seed wins over AVSD_SEED, which wins over the file.
  if (g.seed) {
    kv["seed"] = std::to_string(*g.seed);
    return run_config_from(kv, false);
  }
  return run_config_from(kv, true);
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Json config_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : to_key_values(cfg)) j[k] = v;
  return j;
}

std::vector<TaskInstance> load_data(const std::string& path) {
  if (path.empty()) throw ConfigError("--data", "a dataset path is required");
  auto data = read_dataset(fs::path(path));
  if (data.empty()) throw RuntimeFailure("dataset is empty: " + path);
  return data;
}

Checkpoint load_ckpt(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint", "a checkpoint path is required");
  if (!fs::exists(path)) throw RuntimeFailure("checkpoint not found: " + path);
  return load_checkpoint(path);
}

// Evaluation commands take the model shape from the checkpoint and the task
// from the dataset.
TrainConfig eval_config(const RunConfig& rc, const Checkpoint& ckpt, const std::vector<TaskInstance>& data) {
  TrainConfig cfg = rc.train;
  cfg.model = ckpt.params.config;
  const Vocabulary vocab{data.front().modulus};
  for (const auto& inst : data) {
    if (inst.modulus != vocab.modulus) throw ConfigError("--data", "instances use different moduli");
  }
  if (cfg.model.vocab != vocab.size()) {
    throw ConfigError("--data", "vocabulary mismatch: checkpoint has " + std::to_string(cfg.model.vocab) +
                                    " tokens, dataset needs " + std::to_string(vocab.size()));
  }
  cfg.task.modulus = vocab.modulus;
  cfg.task.chain_length = static_cast<int>(data.front().chain.size());
  return cfg;
}

void save_state(const std::string& path, const TrainState& st, const RunConfig& rc) {
  Checkpoint ck{st.params, st.optimizer, st.step, {}};
  ck.meta = to_key_values(rc);
  save_checkpoint(path, ck);
}

Json step_json(const StepLog& log) {
  Json j{{"type", "step"}, {"step", log.step}, {"loss", log.mean_loss}};
  if (log.eval_accuracy) j["avg_at_k"] = *log.eval_accuracy;
  j["gate_open_rate"] = log.gate_open_rate;
  j["mean_lambda"] = log.mean_lambda;
  j["positions"] = log.positions;
  return j;
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(const Globals& g, std::optional<std::size_t> count, std::ostream& out, std::ostream& err) {
  const auto rc = load(g);
  TaskConfig tc = rc.train.task;
  tc.seed = rc.train.seed;
  const auto data = gen_dataset(tc, count.value_or(rc.data_count), rc.data_first_id);
  if (g.out.empty() || g.out == "-") {
    write_dataset(out, data);
  } else {
    write_dataset(fs::path(g.out), data);
    out << Json{{"instances", data.size()}, {"path", g.out}}.dump() << '\n';
  }
  if (!g.quiet) err << "wrote " << data.size() << " instances\n";
  return kExitOk;
}

struct TrainArgs {
  std::string resume;
  std::string metrics;
  std::size_t stop_after = 0;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  auto rc = load(g);
  if (!g.out.empty()) rc.checkpoint_path = g.out;
  if (!a.metrics.empty()) rc.metrics_path = a.metrics;
  if (!a.resume.empty()) rc.resume_path = a.resume;
  const auto& cfg = rc.train;

  TrainState state;
  if (!rc.resume_path.empty()) {
    if (!fs::exists(rc.resume_path)) throw RuntimeFailure("resume checkpoint not found: " + rc.resume_path);
    auto ck = load_checkpoint(rc.resume_path);
    if (!(ck.params.config == cfg.model)) throw ConfigError("model", "resume checkpoint has a different model shape");
    if (!ck.optimizer) throw RuntimeFailure("resume checkpoint has no optimizer state: " + rc.resume_path);
    if (ck.step > cfg.steps) throw ConfigError("train.steps", "resume checkpoint is past the configured step count");
    state = TrainState{std::move(ck.params), std::move(*ck.optimizer), ck.step};
    if (!g.quiet) err << "resuming at step " << state.step << "\n";
  } else {
    if (!g.quiet) err << "building base model (" << cfg.pretrain.steps << " warmup steps)\n";
    state = TrainState{base_model(cfg), AdamState::zeros(cfg.model), 0};
  }

  Sink metrics(rc.metrics_path, out, rc.resume_path.empty() ? std::ios::trunc : std::ios::app);
  metrics.line(Json{{"type", "header"},
                    {"timestamp", timestamp()},
                    {"start_step", state.step},
                    {"config", config_json(rc)}});

  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& log) {
    metrics.line(step_json(log));
    if (!g.quiet && log.eval_accuracy) {
      err << "step " << log.step << " loss " << log.mean_loss << " avg@" << cfg.eval_k << " " << *log.eval_accuracy
          << "\n";
    }
  };
  hooks.on_checkpoint = [&](const TrainState& st) { save_state(rc.checkpoint_path, st, rc); };
  if (a.stop_after > 0) hooks.should_stop = [&](std::size_t done) { return done >= a.stop_after; };

  const auto res = train_run(cfg, std::move(state), hooks);
  if (res.state.step < cfg.steps) {
    if (!g.quiet) err << "stopped at step " << res.state.step << "\n";
    return kExitOk;
  }
  save_state(rc.checkpoint_path, res.state, rc);
  metrics.line(Json{{"type", "final"}, {"step", res.state.step}, {"avg_at_k", res.final_accuracy}});
  if (!g.quiet) err << "final avg@" << cfg.eval_k << " " << res.final_accuracy << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::optional<std::size_t> k;
  std::optional<double> tau;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream&) {
  const auto rc = load(g);
  const auto ck = load_ckpt(a.checkpoint);
  const auto data = load_data(a.data);
  const auto cfg = eval_config(rc, ck, data);
  const std::size_t k = a.k.value_or(cfg.eval_k);
  if (k == 0) throw ConfigError("--k", "must be >= 1");
  const double acc = eval_avg_at_k(ck.params, data, k, cfg.eval_sampling(), SeedPlan::from(cfg.seed).eval_sampling);
  Sink sink(g.out, out);
  sink.line(Json{{"avg_at_k", acc}, {"k", k}, {"instances", data.size()}, {"temperature", cfg.eval_temperature}});
  return kExitOk;
}

int cmd_pool(const Globals& g, const std::string& in_path, std::ostream& out, std::ostream& err) {
  const auto rc = load(g);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!in_path.empty() && in_path != "-") {
    file.open(in_path);
    if (!file) throw RuntimeFailure("cannot open input: " + in_path);
    in = &file;
  }
  Sink sink(g.out, out);
  const auto stats = pool_stream(*in, *sink, rc.train.epsilon);
  if (!*sink) throw RuntimeFailure("write failed");
  if (!g.quiet) {
    err << Json{{"records", stats.records}, {"errors", stats.errors}, {"renormalized", stats.renormalized}}.dump()
        << '\n';
  }
  return kExitOk;
}

Json credit_json(const char* target, const CreditReport& r) {
  Json top = Json::array();
  for (const auto& e : r.top) {
    top.push_back(Json{{"position", e.position}, {"token", e.token}, {"advantage", e.advantage}, {"sign", e.sign}});
  }
  return Json{{"type", "rollout"},
              {"target", target},
              {"id", r.rollout_id},
              {"top", top},
              {"fraction_wrong_sign", r.fraction_wrong_sign}};
}

Json aggregate_json(const char* target, const CreditAggregate& a) {
  return Json{{"type", "aggregate"},
              {"target", target},
              {"rollouts", a.rollouts},
              {"positions", a.positions},
              {"wrong_sign", a.wrong_sign},
              {"fraction_wrong_sign", a.fraction_wrong_sign},
              {"no_incorrect_rollouts", a.no_incorrect_rollouts}};
}

int cmd_analyze_credit(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream&) {
  const auto rc = load(g);
  const auto ck = load_ckpt(a.checkpoint);
  const auto data = load_data(a.data);
  const auto cfg = eval_config(rc, ck, data);
  const std::size_t k = a.k.value_or(rc.credit_top_k);
  const auto res = analyze_credit(ck.params, data, cfg, k, SeedPlan::from(cfg.seed).eval_sampling);
  Sink sink(g.out, out);
  for (const auto& r : res.avsd) sink.line(credit_json("avsd", r));
  for (const auto& r : res.opsd) sink.line(credit_json("opsd", r));
  sink.line(aggregate_json("avsd", res.avsd_total));
  sink.line(aggregate_json("opsd", res.opsd_total));
  return kExitOk;
}

int cmd_analyze_gate(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream&) {
  const auto rc = load(g);
  const auto ck = load_ckpt(a.checkpoint);
  const auto data = load_data(a.data);
  const auto cfg = eval_config(rc, ck, data);
  const double tau = a.tau.value_or(cfg.gate_threshold);
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("--tau", "must lie in [0, 1]");
  const auto rep = analyze_gate(ck.params, data, cfg, tau, SeedPlan::from(cfg.seed).eval_sampling);
  Sink sink(g.out, out);
  sink.line(Json{{"positions", rep.positions},
                 {"threshold", rep.threshold},
                 {"open_rate", rep.open_rate},
                 {"mean_lambda", rep.mean_lambda},
                 {"histogram", rep.histogram}});
  return kExitOk;
}

int cmd_scale_views(const Globals& g, std::size_t max_views, std::ostream& out, std::ostream& err) {
  const auto rc = load(g);
  if (!g.quiet) err << "training " << max_views << " runs of " << rc.train.steps << " steps\n";
  const auto rows = scale_views_experiment(rc.train, max_views);
  Sink sink(g.out, out);
  for (const auto& row : rows) {
    Json cps = Json::array();
    for (const auto& [step, acc] : row.checkpoints) cps.push_back(Json{{"step", step}, {"avg_at_k", acc}});
    sink.line(Json{{"views", row.view_count}, {"checkpoints", cps}});
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view self-distillation toolkit", "avsd"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides AVSD_SEED and the config)");
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_flag("--quiet", g.quiet, "suppress progress messages");

  std::optional<std::size_t> count;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--count", count, "number of instances (default data.count)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "self-distillation training");
  train->add_option("--resume", ta.resume, "checkpoint to resume from");
  train->add_option("--metrics", ta.metrics, "metrics file (default io.metrics)");
  train->add_option("--stop-after", ta.stop_after, "stop after this many completed steps")->group("");

  EvalArgs ea;
  auto add_eval_opts = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->required();
    sub->add_option("--data", ea.data, "dataset file")->required();
  };
  auto* eval = app.add_subcommand("eval", "Avg@k of a checkpoint on a dataset");
  add_eval_opts(eval);
  eval->add_option("--k", ea.k, "samples per instance (default eval.k)");

  std::string pool_in;
  auto* pool_cmd = app.add_subcommand("pool", "pool logged teacher distributions");
  pool_cmd->add_option("--in", pool_in, "record file (default: stdin)");

  auto* credit = app.add_subcommand("analyze-credit", "sign of top-|advantage| tokens on incorrect rollouts");
  add_eval_opts(credit);
  credit->add_option("--k", ea.k, "positions per rollout (default analysis.top_k)");

  auto* gate_cmd = app.add_subcommand("analyze-gate", "gate-open rate and lambda histogram");
  add_eval_opts(gate_cmd);
  gate_cmd->add_option("--tau", ea.tau, "open threshold (default analysis.gate_threshold)");

  std::size_t max_views = 4;
  auto* scale = app.add_subcommand("scale-views", "train with 1..N views and compare");
  scale->add_option("--max-views", max_views, "largest view count (1-4)")->check(CLI::Range(1, 4));

  // Global flags are accepted before or after the subcommand.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(g, count, out, err);
    if (*train) return cmd_train(g, ta, out, err);
    if (*eval) return cmd_eval(g, ea, out, err);
    if (*pool_cmd) return cmd_pool(g, pool_in, out, err);
    if (*credit) return cmd_analyze_credit(g, ea, out, err);
    if (*gate_cmd) return cmd_analyze_gate(g, ea, out, err);
    if (*scale) return cmd_scale_views(g, max_views, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace avsd::cli
