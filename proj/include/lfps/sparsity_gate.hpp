#pragma once

#include <span>
#include <vector>

#include "lfps/config.hpp"
#include "lfps/kv_store.hpp"
#include "lfps/numeric.hpp"

namespace lfps {

// Per-head priors captured at the end of prefill. Frozen afterwards.
struct HeadStats {
  std::size_t d = 0;
  std::vector<double> sink_keys;    // sink_count x d
  std::vector<double> sink_values;  // sink_count x d
  std::vector<double> mean_key;
  std::vector<double> mean_value;
  double sigma_hat_sq = 0.0;        // logit variance / |q|^2
};

// The three attention-mass components. They are stored scaled by
// exp(-log_shift) so that large logits do not overflow; rho is unaffected.
struct SparsityEstimate {
  double w_sink = 0.0;
  double w_global = 0.0;
  double w_local = 0.0;
  double log_shift = 0.0;
  double rho = 0.0;
  // Logits evaluated while estimating, reusable by later stages.
  IndexedValues sink_logits;
  IndexedValues local_logits;
  double mean_key_logit = 0.0;
  double q_norm_sq = 0.0;
};

HeadStats compute_head_stats(const KvStore& store, std::span<const double> last_query,
                             const LfpsConfig& config);

SparsityEstimate estimate_sparsity(std::span<const double> q, const KvStore& store,
                                   const HeadStats& stats, const LfpsConfig& config);

// rho = w_sink / (w_sink + w_global + w_local).
double sparsity_ratio(double w_sink, double w_global, double w_local);

std::vector<double> bypass_output(std::span<const double> q, const HeadStats& stats,
                                  const LfpsConfig& config);
// Same output, reusing the sink and mean-key logits of an estimate made for
// the same query, so no further dot products are needed.
std::vector<double> bypass_output(const SparsityEstimate& estimate, const HeadStats& stats,
                                  const LfpsConfig& config);

}  // namespace lfps
