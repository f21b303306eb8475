#pragma once

// Plain-text key=value configuration. Nesting is expressed with dotted keys
// ("task.modulus = 7"); '#' starts a comment. Unknown keys are rejected so a
// typo never silently falls back to a default.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "avsd/trainer.hpp"

namespace avsd {

/// Validation failure. `field` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() || message.rfind(field, 0) == 0 ? message : field + ": " + message),
        field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Settings for the command-line driver on top of the training config.
struct RunConfig {
  TrainConfig train;
  std::size_t data_count = 1000;        // data.count
  std::uint64_t data_first_id = 0;      // data.first_id
  std::string checkpoint_path = "avsd.ckpt";  // io.checkpoint
  std::string metrics_path = "metrics.jsonl";  // io.metrics
  std::string resume_path;               // io.resume, empty: fresh run
  std::size_t credit_top_k = 20;         // analysis.top_k
};

using KeyValues = std::map<std::string, std::string>;

/// Raw parse: later duplicates override earlier ones.
KeyValues parse_key_values(std::istream& is);
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies `kv` over the defaults, then AVSD_SEED if set, then validates.
RunConfig run_config_from(const KeyValues& kv, bool apply_env = true);
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, bool apply_env = true);

/// Every accepted key with its current value, sorted; round-trips through
/// run_config_from.
KeyValues to_key_values(const RunConfig& cfg);

/// Names of all accepted keys.
std::vector<std::string> config_keys();

}  // namespace avsd
