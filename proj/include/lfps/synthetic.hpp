#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lfps/trace.hpp"

namespace lfps {

// Parameters of the pattern-planting generator.
//
// Queries share a common direction (query_coherence) and keys carry a
// spatially smoothed importance along it (pattern_strength, cluster_width),
// so the exact Top-k is persistent across steps and clustered in position.
// On top of that:
//   - keys at vertical_positions gain `signal_gain` logits for every query;
//   - for each slash offset o, the key at p - o - b (b < slash_band) gains
//     `slash_gain` logits for the query at position p. The boost lies along
//     that query's private direction, so it also adds noise for all other
//     queries; large values wash out the clustered importance;
//   - sink keys gain sink_gain * (h + 1) / heads logits on head h.
struct SyntheticSpec {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t n_prefill = 4096;
  std::size_t steps = 256;
  std::size_t d = 64;
  std::size_t prefill_window = 32;
  std::size_t sink_count = 4;
  std::vector<std::size_t> vertical_positions;
  std::vector<std::size_t> slash_offsets;
  std::size_t slash_band = 2;
  double signal_gain = 4.0;
  double slash_gain = 0.75;
  double noise_scale = 1.0;
  double query_coherence = 0.93;
  double pattern_strength = 0.12;
  std::size_t cluster_width = 5;
  double sink_gain = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

TraceFile gen_synthetic(const SyntheticSpec& spec);

}  // namespace lfps
