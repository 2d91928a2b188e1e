#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lfps {

enum class BypassMode { mean_only, sink_average };

// Only one rule exists: equal scores resolve to the lower position.
enum class TieBreak { lower_index };

struct LfpsConfig {
  std::size_t d = 64;
  std::size_t s = 32;          // prefill bootstrap window
  double r = 0.95;             // table decay
  double epsilon = 0.85;       // bypass threshold on the sink share
  double a = 0.2;              // kurtosis threshold scale
  std::vector<std::int64_t> expansion_offsets{-1, 0, 1, 2};
  std::size_t sink_count = 4;
  std::size_t local_window = 6;
  TieBreak tie_break = TieBreak::lower_index;
  BypassMode bypass_mode = BypassMode::sink_average;
  // Forces thresholds and means to -inf so every non-sink position is probed.
  bool exhaustive_fallback = false;

  // Throws lfps::Error(invalid_argument) on any violated invariant.
  void validate() const;
};

}  // namespace lfps
