#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lfps/config.hpp"
#include "lfps/engine.hpp"
#include "lfps/trace.hpp"

namespace lfps {

inline constexpr int kReportSchemaVersion = 1;

enum class RunMode { lfps, topk_oracle, full };

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct RunOptions {
  RunMode mode = RunMode::lfps;
  double k_fraction = 0.02;
  LfpsConfig config;   // d, s, sink_count: 0 adopts the trace value, nonzero must match
  bool oracle = true;  // score overlap and output error against exact references
  std::size_t threads = 1;
  bool snapshot = false;  // attach final score tables (lfps mode)
};

struct StepRecord {
  std::uint64_t layer = 0;
  std::uint64_t head = 0;
  std::uint64_t step = 0;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double eta = 0.0;             // NaN when not scored
  std::uint64_t c0 = 0;
  std::uint64_t c1 = 0;
  std::uint64_t probe = 0;
  double candidate_fraction = 0.0;  // |C1| / n
  bool bypassed = false;
  double rho = 0.0;
  double output_error = 0.0;    // NaN when not scored
  std::uint64_t dot_products = 0;
  std::int64_t gate_ns = 0;
  std::int64_t select_ns = 0;   // thresholds + initial selection + expansion
  std::int64_t topk_ns = 0;
  std::int64_t output_ns = 0;
  std::int64_t update_ns = 0;
  std::int64_t step_ns = 0;
  std::int64_t reference_ns = 0;  // exact Top-k step on the same state, 0 if not run
};

struct Aggregates {
  std::uint64_t records = 0;
  double mean_eta = 0.0;
  double median_eta = 0.0;
  double mean_candidate_fraction = 0.0;
  double bypass_rate = 0.0;
  double mean_output_error = 0.0;
  double steps_per_sec_per_head = 0.0;
  double tokens_per_sec = 0.0;
  double reference_steps_per_sec_per_head = 0.0;
  double reference_tokens_per_sec = 0.0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t table_clamps = 0;
  std::uint64_t c0_not_in_c1 = 0;
};

// Final score tables of one head in logical position order, starting at
// first_position (= sink_count).
struct TableSnapshot {
  std::uint64_t layer = 0;
  std::uint64_t head = 0;
  std::uint64_t first_position = 0;
  std::vector<double> ver;
  std::vector<double> sla;
};

struct RunReport {
  int schema_version = kReportSchemaVersion;
  std::string mode = "lfps";
  double k_fraction = 0.0;
  LfpsConfig config;
  bool oracle = true;
  std::uint64_t threads = 1;
  TraceHeader trace;
  std::vector<StepRecord> records;
  Aggregates aggregates;
  std::vector<TableSnapshot> snapshots;
};

// Fills d, s and sink_count from the header where they are 0 and rejects
// nonzero values that disagree with it.
LfpsConfig resolve_config(const TraceHeader& header, LfpsConfig config);

// Session for one layer-major head index, bootstrapped from its prefill.
HeadSession bootstrap_head(const TraceFile& trace, std::size_t head_index,
                           const LfpsConfig& config);

RunReport run_trace(const TraceFile& trace, const RunOptions& options);

// Recomputes the aggregate block from the records. Keeps oracle_calls,
// table_clamps and c0_not_in_c1, which are not derivable from records.
Aggregates aggregate(const std::vector<StepRecord>& records, std::uint64_t head_count,
                     Aggregates counters = {});

std::string emit_json(const RunReport& report);
std::string emit_csv(const RunReport& report);
RunReport parse_report_json(const std::string& text);

}  // namespace lfps
