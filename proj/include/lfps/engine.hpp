#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfps/attention.hpp"
#include "lfps/candidates.hpp"
#include "lfps/config.hpp"
#include "lfps/kv_store.hpp"
#include "lfps/score_tables.hpp"
#include "lfps/sparsity_gate.hpp"

namespace lfps {

struct StageTimings {
  std::int64_t gate_ns = 0;
  std::int64_t threshold_ns = 0;
  std::int64_t select_ns = 0;
  std::int64_t expand_ns = 0;
  std::int64_t topk_ns = 0;
  std::int64_t output_ns = 0;
  std::int64_t update_ns = 0;
  std::int64_t append_ns = 0;
  std::int64_t total() const {
    return gate_ns + threshold_ns + select_ns + expand_ns + topk_ns + output_ns + update_ns +
           append_ns;
  }
};

struct StepResult {
  std::vector<double> output;
  AttentionOutput attention;  // empty on bypass
  CandidateSet candidates;    // empty on bypass
  std::size_t probe_size = 0;
  std::size_t n = 0;          // store size the step attended over
  bool bypassed = false;
  double rho = 0.0;
  std::uint64_t gate_dots = 0;   // dot() calls made by the gate
  std::uint64_t probe_dots = 0;  // dot() calls made by top-k selection
  std::uint64_t clamps = 0;      // table entries clamped at zero this step
  std::size_t c0_not_in_c1 = 0;
  StageTimings timings;
};

class HeadSession {
 public:
  HeadSession(KvStore store, ScoreTablePair tables, HeadStats stats, LfpsConfig config);

  const KvStore& store() const noexcept { return store_; }
  const ScoreTablePair& tables() const noexcept { return tables_; }
  const HeadStats& stats() const noexcept { return stats_; }
  const LfpsConfig& config() const noexcept { return config_; }
  std::size_t step() const noexcept { return step_; }

  // One decoding step. Any failure leaves the session unchanged.
  StepResult decode_step(std::span<const double> q, std::span<const double> new_key,
                         std::span<const double> new_value, double k_fraction);

  // Hash of store rows, table contents and step counter.
  std::uint64_t state_hash() const;

 private:
  KvStore store_;
  ScoreTablePair tables_;
  HeadStats stats_;
  LfpsConfig config_;
  std::size_t step_ = 0;
};

// keys/values are n x d row-major; prefill_weights oldest first, each of
// length n - sink_count.
HeadSession prefill_bootstrap(std::span<const double> keys, std::span<const double> values,
                              std::span<const std::vector<double>> prefill_weights,
                              std::span<const double> last_query, const LfpsConfig& config);

// k = max(1, round(fraction * n)).
std::size_t resolve_budget(double k_fraction, std::size_t n);

struct StepInput {
  std::vector<double> query;
  std::vector<double> key;
  std::vector<double> value;
};

struct SessionRun {
  std::vector<StepResult> results;
  std::optional<std::string> error;  // set when a step failed; results are partial
  std::size_t failed_step = 0;
};

SessionRun run_session(HeadSession& session, std::span<const StepInput> stream,
                       double k_fraction);

}  // namespace lfps
