#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lfps/config.hpp"
#include "lfps/numeric.hpp"

namespace lfps {

struct ThresholdPair {
  double tau_ver = 0.0;
  double tau_sla = 0.0;
  double mean_ver = 0.0;
  double mean_sla = 0.0;
  double kappa_ver = 0.0;
  double kappa_sla = 0.0;
  // A flat table carries no pattern; its contribution is skipped.
  bool ver_degenerate = false;
  bool sla_degenerate = false;
};

// Vertical and slash importance tables of one head, indexed by KV position
// over the non-sink range [sink_count, sink_count + m).
//
// Decay is applied lazily through a shared scale factor so that an update
// touches only the selected positions. The slash table lives in a ring buffer
// whose base moves back by one slot per update, which realises the
// one-position diagonal shift in O(1). The score shifted past the last
// position is carried into the slot that the following grow() exposes, so the
// slash mass follows its diagonal onto the newly appended key.
class ScoreTablePair {
 public:
  ScoreTablePair() = default;

  // Bootstrap from the last s prefill steps. `prefill_weights` is ordered
  // oldest first; each vector covers the non-sink range and is indexed by
  // position - sink_count.
  static ScoreTablePair init(std::span<const std::vector<double>> prefill_weights,
                             const LfpsConfig& config);

  std::size_t size() const noexcept { return m_; }
  std::size_t first_position() const noexcept { return sink_count_; }
  std::size_t end_position() const noexcept { return sink_count_ + m_; }

  double ver(Position p) const {
    if (p < sink_count_ || p >= end_position()) return 0.0;
    return ver_[p - sink_count_] * scale_;
  }
  double sla(Position p) const {
    if (p < sink_count_ || p >= end_position()) return 0.0;
    return sla_[sla_slot(p - sink_count_)] * scale_;
  }
  std::vector<double> ver_values() const;
  std::vector<double> sla_values() const;

  // Total tracked mass. The slash sum includes a carried slot awaiting grow().
  double ver_sum() const;
  double sla_sum() const;

  // Applies one decay step plus the residuals of the final Top-k set.
  // `weights` are normalized attention weights over C2 (sorted by position).
  void update(const IndexedValues& weights);
  // Extends both tables by one position (the key appended this step).
  void grow();
  // Preallocates room for `positions` tracked positions.
  void reserve(std::size_t positions) { ensure_capacity(positions + 3); }

  ThresholdPair thresholds(const LfpsConfig& config) const;

  // Positions whose score is strictly above the threshold, ascending.
  void ver_above(double threshold, std::vector<Position>& out) const;
  void sla_above(double threshold, std::vector<Position>& out) const;

  bool update_pending() const noexcept { return pending_; }
  std::uint64_t clamp_count() const noexcept { return clamps_; }

  // Bitwise comparison of logical contents (used by determinism tests).
  bool same_contents(const ScoreTablePair& other) const;

 private:
  std::size_t sla_slot(std::size_t logical) const noexcept {
    std::size_t p = sla_base_ + logical;
    return p >= cap_ ? p - cap_ : p;
  }
  void ensure_capacity(std::size_t needed);
  void renormalize();

  std::size_t sink_count_ = 0;
  std::size_t m_ = 0;
  std::size_t cap_ = 0;
  double r_ = 0.0;
  double scale_ = 1.0;
  std::vector<double> ver_;   // physical = logical / scale_, size cap_
  std::vector<double> sla_;   // ring, logical i at sla_slot(i)
  std::size_t sla_base_ = 0;
  bool pending_ = false;
  std::uint64_t clamps_ = 0;
};

}  // namespace lfps
