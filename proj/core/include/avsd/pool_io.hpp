#pragma once

// Sidecar pooling of externally produced log-probabilities. Input is one
// record per line:
//   {"id":..,"position":..,"student_logp":[..],"view_logps":[[..],..],"weights":[..]}
// ("weights" optional). Output, one line per input line in the same order:
//   {"id":..,"position":..,"qstar":[..],"a_hat":[..],"lambda":[..],"residual":[..],"a_geo":[..]}
// or {"id":..,"position":..,"error":"..."} when the record is malformed.
// qstar is in log space.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avsd/signal.hpp"

namespace avsd {

/// Arrays whose log-sum-exp is within this of zero are accepted as is.
inline constexpr double kNormalizedTolerance = 1e-6;
/// Beyond the accepted tolerance but within this, arrays are renormalized
/// and counted as a warning; further off is a record error.
inline constexpr double kRenormalizeTolerance = 1e-3;

struct PoolRecord {
  std::uint64_t id = 0;
  std::uint64_t position = 0;
  std::vector<double> student_logp;
  std::vector<std::vector<double>> view_logps;
  std::optional<std::vector<double>> weights;
};

struct PoolStats {
  std::size_t records = 0;
  std::size_t errors = 0;
  std::size_t renormalized = 0;  // arrays renormalized on ingest
};

/// Pools one record; throws RejectedInput for malformed content.
PooledSignal pool_record(const PoolRecord& rec, double epsilon, std::size_t& renormalized);

/// Transforms one input line into one output line (without newline).
std::string pool_line(const std::string& line, double epsilon, PoolStats& stats);

PoolStats pool_stream(std::istream& in, std::ostream& out, double epsilon = kDefaultEpsilon);

}  // namespace avsd
