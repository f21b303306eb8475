#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   char[4]  magic "AVSD"
//   u32      format version (1)
//   u32      flags (bit 0: optimizer state follows the parameters)
//   u64      training step
//   u64      vocab, embed_dim, hidden, window
//   u32      block count (6)
//   per block: u64 rows, u64 cols
//   f64[]    parameter blocks in declaration order, row-major
//   if flags & 1:  i64 adam t, then first-moment blocks, then second-moment blocks
//
// A sidecar "<path>.meta" holds key=value lines (config, seed).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "avsd/toy_lm.hpp"

namespace avsd {

inline constexpr char kCheckpointMagic[4] = {'A', 'V', 'S', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ToyLMParams params;
  std::optional<AdamState> optimizer;
  std::uint64_t step = 0;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& path);

}  // namespace avsd
