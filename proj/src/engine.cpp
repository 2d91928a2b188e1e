#include "lfps/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <string>

#include "lfps/error.hpp"

namespace lfps {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(to - from).count();
}

void check_dim(std::span<const double> v, std::size_t d, const char* what) {
  if (v.size() != d) {
    throw Error(Errc::dimension_mismatch, std::string("decode step: ") + what + " has length " +
                                              std::to_string(v.size()) + ", expected " +
                                              std::to_string(d));
  }
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::numeric, std::string(what) + " has a non-finite entry");
  }
}

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
};

}  // namespace

std::size_t resolve_budget(double k_fraction, std::size_t n) {
  if (!(k_fraction > 0.0) || !std::isfinite(k_fraction)) {
    throw Error(Errc::invalid_argument, "budget fraction must be positive");
  }
  const double k = std::round(k_fraction * static_cast<double>(n));
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

HeadSession::HeadSession(KvStore store, ScoreTablePair tables, HeadStats stats, LfpsConfig config)
    : store_(std::move(store)),
      tables_(std::move(tables)),
      stats_(std::move(stats)),
      config_(std::move(config)) {
  config_.validate();
  if (tables_.size() + config_.sink_count != store_.size()) {
    throw Error(Errc::invalid_state, "session: tables do not cover the non-sink range");
  }
}

StepResult HeadSession::decode_step(std::span<const double> q, std::span<const double> new_key,
                                    std::span<const double> new_value, double k_fraction) {
  const std::size_t d = store_.dim();
  check_dim(q, d, "query");
  check_dim(new_key, d, "key");
  check_dim(new_value, d, "value");
  check_finite(q, "decode step: query");
  check_finite(new_key, "decode step: key");
  check_finite(new_value, "decode step: value");
  const std::size_t n = store_.size();

  StepResult res;
  res.n = n;
  const std::uint64_t dots_before = dot_call_count();
  auto t0 = Clock::now();
  const SparsityEstimate est = estimate_sparsity(q, store_, stats_, config_);
  res.rho = est.rho;
  auto t1 = Clock::now();
  res.gate_dots = dot_call_count() - dots_before;
  res.timings.gate_ns = elapsed_ns(t0, t1);

  IndexedValues update_weights;
  if (est.rho > config_.epsilon) {
    res.bypassed = true;
    res.output = bypass_output(est, stats_, config_);
  } else {
    const ThresholdPair thr = tables_.thresholds(config_);
    auto t2 = Clock::now();
    res.candidates.c0 = select_initial(tables_, thr);
    auto t3 = Clock::now();
    res.candidates.c1 = expand(res.candidates.c0, tables_, thr, config_);
    const IndexSet probe = finalize_probe_set(res.candidates.c1, n, config_);
    auto t4 = Clock::now();
    res.candidates.budget_k = resolve_budget(k_fraction, n);
    const IndexedValues selected = exact_topk_restricted(q, store_, probe, res.candidates.budget_k);
    res.probe_size = probe.size();
    res.probe_dots = dot_call_count() - dots_before - res.gate_dots;
    res.candidates.c2.reserve(selected.size());
    for (const auto& e : selected) res.candidates.c2.push_back(e.index);
    auto t5 = Clock::now();
    res.attention = attention_output(store_, selected, est.sink_logits);
    res.output = res.attention.output;
    // Table updates see the weights normalized over C2 alone.
    update_weights = softmax_restricted(selected);
    auto t6 = Clock::now();
    res.c0_not_in_c1 = res.candidates.c0.size() -
                       intersection_size(res.candidates.c0, res.candidates.c1);
    res.timings.threshold_ns = elapsed_ns(t1, t2);
    res.timings.select_ns = elapsed_ns(t2, t3);
    res.timings.expand_ns = elapsed_ns(t3, t4);
    res.timings.topk_ns = elapsed_ns(t4, t5);
    res.timings.output_ns = elapsed_ns(t5, t6);
  }

  // Commit. Allocation happens first so that nothing below can fail after the
  // tables have been touched.
  auto c0 = Clock::now();
  store_.reserve(n + 1);
  tables_.reserve(tables_.size() + 1);
  const std::uint64_t clamps_before = tables_.clamp_count();
  if (!res.bypassed) tables_.update(update_weights);
  auto c1 = Clock::now();
  store_.append(new_key, new_value);
  tables_.grow();
  ++step_;
  auto c2 = Clock::now();
  res.clamps = tables_.clamp_count() - clamps_before;
  res.timings.update_ns = elapsed_ns(c0, c1);
  res.timings.append_ns = elapsed_ns(c1, c2);
  return res;
}

std::uint64_t HeadSession::state_hash() const {
  Fnv1a h;
  const std::size_t n = store_.size();
  for (std::size_t i = 0; i < n; ++i) {
    h.doubles(store_.key(i));
    h.doubles(store_.value(i));
  }
  h.doubles(tables_.ver_values());
  h.doubles(tables_.sla_values());
  const std::uint64_t step = step_;
  h.bytes(&step, sizeof step);
  return h.h;
}

HeadSession prefill_bootstrap(std::span<const double> keys, std::span<const double> values,
                              std::span<const std::vector<double>> prefill_weights,
                              std::span<const double> last_query, const LfpsConfig& config) {
  config.validate();
  const std::size_t d = config.d;
  if (keys.size() % d != 0 || keys.size() != values.size()) {
    throw Error(Errc::dimension_mismatch, "prefill: key/value matrices must be n x d");
  }
  const std::size_t n = keys.size() / d;
  if (n <= config.sink_count + config.s) {
    throw Error(Errc::invalid_argument, "prefill: need more than sink_count + s rows");
  }
  for (const auto& w : prefill_weights) {
    if (w.size() != n - config.sink_count) {
      throw Error(Errc::dimension_mismatch, "prefill: weight vectors must cover n - sink_count");
    }
    check_finite(w, "prefill: weight vector");
  }
  check_finite(keys, "prefill: key matrix");
  check_finite(values, "prefill: value matrix");
  check_finite(last_query, "prefill: last query");
  KvStore store(d);
  store.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    store.append(keys.subspan(i * d, d), values.subspan(i * d, d));
  }
  ScoreTablePair tables = ScoreTablePair::init(prefill_weights, config);
  HeadStats stats = compute_head_stats(store, last_query, config);
  return HeadSession(std::move(store), std::move(tables), std::move(stats), config);
}

SessionRun run_session(HeadSession& session, std::span<const StepInput> stream,
                       double k_fraction) {
  SessionRun run;
  if (stream.empty()) {
    run.error = "run_session: empty stream";
    return run;
  }
  run.results.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    try {
      run.results.push_back(
          session.decode_step(stream[i].query, stream[i].key, stream[i].value, k_fraction));
    } catch (const std::exception& e) {
      run.error = "step " + std::to_string(i) + ": " + e.what();
      run.failed_step = i;
      break;
    }
  }
  return run;
}

}  // namespace lfps
