#include "lfps/sparsity_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lfps/error.hpp"

namespace lfps {

HeadStats compute_head_stats(const KvStore& store, std::span<const double> last_query,
                             const LfpsConfig& config) {
  const std::size_t d = store.dim();
  const std::size_t n = store.size();
  const std::size_t sinks = config.sink_count;
  if (last_query.size() != d) throw Error(Errc::dimension_mismatch, "head stats: query length");
  if (n <= sinks + 1) {
    throw Error(Errc::invalid_argument, "head stats: need more than sink_count + 1 rows");
  }
  const double q_norm_sq = squared_norm(last_query);
  if (!(q_norm_sq > 0.0)) throw Error(Errc::invalid_argument, "head stats: zero-norm query");

  HeadStats stats;
  stats.d = d;
  stats.sink_keys.reserve(sinks * d);
  stats.sink_values.reserve(sinks * d);
  for (std::size_t i = 0; i < sinks; ++i) {
    auto k = store.key(i);
    auto v = store.value(i);
    stats.sink_keys.insert(stats.sink_keys.end(), k.begin(), k.end());
    stats.sink_values.insert(stats.sink_values.end(), v.begin(), v.end());
  }

  const std::size_t count = n - sinks;
  stats.mean_key.assign(d, 0.0);
  stats.mean_value.assign(d, 0.0);
  std::vector<double> logits(count);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = sinks; i < n; ++i) {
    auto k = store.key(i);
    auto v = store.value(i);
    for (std::size_t c = 0; c < d; ++c) {
      stats.mean_key[c] += k[c];
      stats.mean_value[c] += v[c];
    }
    logits[i - sinks] = dot(last_query, k) * inv_sqrt_d;
  }
  for (std::size_t c = 0; c < d; ++c) {
    stats.mean_key[c] /= static_cast<double>(count);
    stats.mean_value[c] /= static_cast<double>(count);
  }
  // Identical logits can leave a rounding-level residue around the computed
  // mean; report exactly zero for them.
  const bool constant =
      std::all_of(logits.begin(), logits.end(), [&](double l) { return l == logits[0]; });
  const Moments mo = moments(logits);
  const double variance = constant ? 0.0 : mo.centered_sum2 / static_cast<double>(count);
  stats.sigma_hat_sq = variance / q_norm_sq;
  return stats;
}

double sparsity_ratio(double w_sink, double w_global, double w_local) {
  return w_sink / (w_sink + w_global + w_local);
}

SparsityEstimate estimate_sparsity(std::span<const double> q, const KvStore& store,
                                   const HeadStats& stats, const LfpsConfig& config) {
  const std::size_t d = store.dim();
  const std::size_t n = store.size();
  const std::size_t sinks = config.sink_count;
  if (q.size() != d) throw Error(Errc::dimension_mismatch, "sparsity: query length");
  if (n <= sinks + config.local_window) {
    throw Error(Errc::invalid_argument, "sparsity: need more than sink_count + local_window rows");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  SparsityEstimate est;
  double shift = -std::numeric_limits<double>::infinity();
  est.sink_logits.reserve(sinks);
  for (std::size_t i = 0; i < sinks; ++i) {
    double l = dot(q, store.key(i)) * inv_sqrt_d;
    est.sink_logits.push_back({i, l});
    shift = std::max(shift, l);
  }
  est.local_logits.reserve(config.local_window);
  for (std::size_t i = n - config.local_window; i < n; ++i) {
    double l = dot(q, store.key(i)) * inv_sqrt_d;
    est.local_logits.push_back({i, l});
    shift = std::max(shift, l);
  }
  est.mean_key_logit = dot(q, stats.mean_key) * inv_sqrt_d;
  est.q_norm_sq = squared_norm(q);
  // Arithmetic mean of a log-normal: geometric mean times exp(sigma^2 / 2).
  const double global_log = est.mean_key_logit + est.q_norm_sq * stats.sigma_hat_sq / 2.0 +
                            std::log(static_cast<double>(n - sinks));
  shift = std::max(shift, global_log);
  if (!std::isfinite(shift)) throw Error(Errc::numeric, "sparsity: non-finite logit");

  for (const auto& e : est.sink_logits) est.w_sink += std::exp(e.value - shift);
  for (const auto& e : est.local_logits) est.w_local += std::exp(e.value - shift);
  est.w_global = std::exp(global_log - shift);
  est.log_shift = shift;
  est.rho = sparsity_ratio(est.w_sink, est.w_global, est.w_local);
  if (!std::isfinite(est.rho)) throw Error(Errc::numeric, "sparsity: non-finite ratio");
  return est;
}

namespace {

// Softmax blend of the sink values and the mean value.
std::vector<double> blend(const IndexedValues& sink_logits, double mean_logit,
                          const HeadStats& stats) {
  const std::size_t d = stats.d;
  const std::size_t sinks = sink_logits.size();
  IndexedValues logits = sink_logits;
  logits.push_back({sinks, mean_logit});
  const IndexedValues w = softmax_restricted(logits);
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < sinks; ++i) {
    const double* v = stats.sink_values.data() + i * d;
    for (std::size_t c = 0; c < d; ++c) out[c] += w[i].value * v[c];
  }
  for (std::size_t c = 0; c < d; ++c) out[c] += w[sinks].value * stats.mean_value[c];
  return out;
}

}  // namespace

std::vector<double> bypass_output(std::span<const double> q, const HeadStats& stats,
                                  const LfpsConfig& config) {
  if (config.bypass_mode == BypassMode::mean_only) return stats.mean_value;
  const std::size_t d = stats.d;
  if (q.size() != d) throw Error(Errc::dimension_mismatch, "bypass: query length");
  const std::size_t sinks = stats.sink_keys.size() / d;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  IndexedValues logits;
  logits.reserve(sinks);
  for (std::size_t i = 0; i < sinks; ++i) {
    std::span<const double> k(stats.sink_keys.data() + i * d, d);
    logits.push_back({i, dot(q, k) * inv_sqrt_d});
  }
  const double mean_logit =
      dot(q, stats.mean_key) * inv_sqrt_d + squared_norm(q) * stats.sigma_hat_sq / 2.0;
  return blend(logits, mean_logit, stats);
}

std::vector<double> bypass_output(const SparsityEstimate& estimate, const HeadStats& stats,
                                  const LfpsConfig& config) {
  if (config.bypass_mode == BypassMode::mean_only) return stats.mean_value;
  return blend(estimate.sink_logits,
               estimate.mean_key_logit + estimate.q_norm_sq * stats.sigma_hat_sq / 2.0, stats);
}

}  // namespace lfps
