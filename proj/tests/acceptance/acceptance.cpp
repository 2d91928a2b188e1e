// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lfps/attention.hpp"
#include "lfps/engine.hpp"
#include "lfps/error.hpp"
#include "lfps/numeric.hpp"
#include "lfps/report.hpp"
#include "lfps/score_tables.hpp"
#include "lfps/synthetic.hpp"
#include "lfps/trace.hpp"

using namespace lfps;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %-22s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) total += x = e(rng);
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------

// Causal prefill weights: the step j back from the end only sees positions up
// to m - j, so nothing falls off the end of the slash table at bootstrap.
std::vector<std::vector<double>> causal_prefill(std::mt19937_64& rng, std::size_t m,
                                                std::size_t s, double mass) {
  std::vector<std::vector<double>> w(s, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t visible = m - (s - 1 - i);
    auto row = simplex(rng, visible);
    for (std::size_t p = 0; p < visible; ++p) w[i][p] = mass * row[p];
  }
  return w;
}

// Normalized weights over a random C2, each at least 1/(2|C2|).
IndexedValues floor_weights(std::mt19937_64& rng, std::size_t m, std::size_t sinks) {
  std::uniform_int_distribution<std::size_t> size_dist(8, 64);
  const std::size_t c = std::min(size_dist(rng), m);
  std::vector<std::size_t> pos(m);
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  pos.resize(c);
  std::sort(pos.begin(), pos.end());
  const auto extra = simplex(rng, c);
  IndexedValues w;
  for (std::size_t i = 0; i < c; ++i) {
    w.push_back({pos[i] + sinks, 0.5 / static_cast<double>(c) + 0.5 * extra[i]});
  }
  return w;
}

void conservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  LfpsConfig c;
  c.s = 32;
  c.r = 0.95;
  c.sink_count = 4;
  const std::size_t m = 1024;

  ScoreTablePair t = ScoreTablePair::init(causal_prefill(rng, m, c.s, 1.0), c);
  double worst = std::abs(t.ver_sum() - 10.0) / 10.0;
  worst = std::max(worst, std::abs(t.sla_sum() - 10.0) / 10.0);
  for (int step = 0; step < 500; ++step) {
    t.update(floor_weights(rng, t.size(), c.sink_count));
    worst = std::max(worst, std::abs(t.ver_sum() - 10.0) / 10.0);
    worst = std::max(worst, std::abs(t.sla_sum() - 10.0) / 10.0);
    t.grow();
  }
  const bool held = worst <= 1e-6 && t.clamp_count() == 0;

  ScoreTablePair p = ScoreTablePair::init(causal_prefill(rng, m, c.s, 0.3), c);
  const double start = p.ver_sum();
  for (int step = 0; step < 200; ++step) {
    p.update(floor_weights(rng, p.size(), c.sink_count));
    p.grow();
  }
  const double gap = std::max(std::abs(p.ver_sum() - 10.0), std::abs(p.sla_sum() - 10.0));
  const double secs = seconds_since(t0);
  report("conservation", held && gap <= 1e-3 && secs < 1.0,
         fmt("max rel dev %.2e over 500 steps, clamps %llu; from S0=%.3f gap %.2e at step 200; "
             "%.3f s",
             worst, static_cast<unsigned long long>(t.clamp_count()), start, gap, secs));
}

// ---------------------------------------------------------------------------

// Softmax over sinks and the chosen set, in long double.
std::vector<double> restricted_attention(std::span<const double> q, const KvStore& store,
                                         const IndexSet& chosen, std::size_t sinks) {
  const std::size_t d = store.dim();
  std::vector<std::size_t> rows;
  for (std::size_t p = 0; p < sinks; ++p) rows.push_back(p);
  rows.insert(rows.end(), chosen.begin(), chosen.end());
  std::vector<long double> logits;
  for (auto p : rows) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < d; ++i) acc += static_cast<long double>(q[i]) * store.key(p)[i];
    logits.push_back(acc / std::sqrt(static_cast<long double>(d)));
  }
  const long double top = *std::max_element(logits.begin(), logits.end());
  long double den = 0.0L;
  std::vector<long double> out(d, 0.0L);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const long double w = std::exp(logits[j] - top);
    den += w;
    for (std::size_t i = 0; i < d; ++i) out[i] += w * store.value(rows[j])[i];
  }
  std::vector<double> r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = static_cast<double>(out[i] / den);
  return r;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

void oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> n_dist(64, 2000), d_dist(1, 128), sink_dist(1, 4);
  std::uniform_real_distribution<double> frac(0.005, 0.2);
  std::uniform_int_distribution<int> grid(-1, 1);
  int steps = 0, set_mismatch = 0;
  double worst = 0.0;
  for (int session = 0; session < 20; ++session) {
    LfpsConfig c;
    c.d = d_dist(rng);
    c.s = 4;
    c.sink_count = sink_dist(rng);
    c.exhaustive_fallback = true;
    c.epsilon = 1.0;
    const std::size_t n = n_dist(rng);
    // Every other session draws keys from {-1, 0, 1} so that logits tie.
    const bool ties = session % 2 == 1;
    auto draw_key = [&] {
      if (!ties) return gaussian(rng, c.d);
      std::vector<double> k(c.d);
      for (auto& x : k) x = grid(rng);
      return k;
    };
    std::vector<double> keys, values;
    for (std::size_t i = 0; i < n; ++i) {
      auto k = draw_key();
      keys.insert(keys.end(), k.begin(), k.end());
      auto v = gaussian(rng, c.d);
      values.insert(values.end(), v.begin(), v.end());
    }
    std::vector<std::vector<double>> w;
    for (std::size_t j = 0; j < c.s; ++j) w.push_back(simplex(rng, n - c.sink_count));
    HeadSession s = prefill_bootstrap(keys, values, w, gaussian(rng, c.d), c);

    for (int step = 0; step < 10; ++step) {
      std::vector<double> q;
      if (ties) {
        q.resize(c.d);
        for (auto& x : q) x = grid(rng);
        if (std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; })) q[0] = 1.0;
      } else {
        q = gaussian(rng, c.d);
      }
      const double f = frac(rng);
      const std::size_t k = resolve_budget(f, s.store().size());
      const IndexSet exact = topk_oracle(q, s.store(), k, c.sink_count);
      const auto want = restricted_attention(q, s.store(), exact, c.sink_count);
      StepResult r = s.decode_step(q, draw_key(), gaussian(rng, c.d), f);
      if (r.bypassed || r.candidates.c2 != exact) ++set_mismatch;
      worst = std::max(worst, rel_l2(r.output, want));
      ++steps;
    }
  }
  const double secs = seconds_since(t0);
  report("oracle_equivalence", set_mismatch == 0 && worst <= 1e-9 && secs < 10.0,
         fmt("%d steps, %d set mismatches, max output rel err %.2e, %.2f s", steps, set_mismatch,
             worst, secs));
}

// ---------------------------------------------------------------------------

SyntheticSpec overlap_spec() {
  SyntheticSpec s;
  s.n_prefill = 8192;
  s.steps = 256;
  s.d = 64;
  s.prefill_window = 32;
  s.sink_count = 4;
  s.vertical_positions = {300, 2500, 6000};
  s.slash_offsets = {64, 700};
  s.seed = 303;
  return s;
}

RunOptions lfps_options(bool oracle) {
  RunOptions o;
  o.mode = RunMode::lfps;
  o.k_fraction = 0.02;
  o.oracle = oracle;
  o.config.d = o.config.s = o.config.sink_count = 0;  // adopt the trace
  o.config.a = 0.2;
  o.config.epsilon = 0.85;
  o.config.r = 0.95;
  return o;
}

void overlap_and_expansion(const TraceFile& trace) {
  auto t0 = Clock::now();
  RunReport with = run_trace(trace, lfps_options(true));
  const double secs = seconds_since(t0);
  const double eta = with.aggregates.mean_eta;
  report("overlap", eta >= 0.80 && secs < 60.0,
         fmt("mean eta %.4f (median %.4f), bypass rate %.3f, %.1f s including oracle scoring", eta,
             with.aggregates.median_eta, with.aggregates.bypass_rate, secs));

  RunOptions o = lfps_options(true);
  o.config.expansion_offsets = {0};
  RunReport without = run_trace(trace, o);
  const double gain = eta - without.aggregates.mean_eta;
  report("expansion_gain", gain >= 0.01,
         fmt("eta %.4f with offsets {-1,0,1,2}, %.4f with {0}, gain %+.4f", eta,
             without.aggregates.mean_eta, gain));
}

void candidate_fraction(const TraceFile& trace) {
  std::vector<double> fractions;
  std::string detail;
  for (double a : {0.1, 0.2, 0.3, 0.4}) {
    RunOptions o = lfps_options(false);
    o.config.a = a;
    fractions.push_back(run_trace(trace, o).aggregates.mean_candidate_fraction);
    detail += fmt("a=%.1f: %.4f  ", a, fractions.back());
  }
  const bool ok = std::is_sorted(fractions.rbegin(), fractions.rend());
  report("candidate_fraction", ok, detail);
}

void bypass_monotonicity() {
  SyntheticSpec s;
  s.heads = 8;
  s.n_prefill = 2048;
  s.steps = 48;
  s.d = 64;
  s.prefill_window = 16;
  s.vertical_positions = {100, 900};
  s.slash_offsets = {32};
  // Head h gets sink_gain * (h + 1) / 8 extra sink logits.
  s.sink_gain = 12.0;
  s.seed = 404;
  const TraceFile trace = gen_synthetic(s);
  std::vector<double> rates;
  std::string detail;
  for (double eps : {0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0}) {
    RunOptions o = lfps_options(false);
    o.config.epsilon = eps;
    rates.push_back(run_trace(trace, o).aggregates.bypass_rate);
    detail += fmt("%.2f:%.3f ", eps, rates.back());
  }
  const bool ok = std::is_sorted(rates.rbegin(), rates.rend()) && rates.back() == 0.0 &&
                  rates.front() > 0.0;
  report("bypass_monotonicity", ok, detail);
}

// ---------------------------------------------------------------------------

std::vector<double> widen(const std::vector<float>& v, std::size_t row, std::size_t d) {
  return {v.begin() + static_cast<std::ptrdiff_t>(row * d),
          v.begin() + static_cast<std::ptrdiff_t>((row + 1) * d)};
}

// The dense baseline: exact logits for every non-sink key, bounded-heap Top-k,
// then attention over the selection and the sinks.
AttentionOutput exact_topk_step(std::span<const double> q, const KvStore& store, std::size_t k,
                                std::size_t sinks, const IndexSet& all) {
  const IndexedValues selected = exact_topk_restricted(q, store, all, k);
  IndexedValues sink_logits;
  for (std::size_t p = 0; p < sinks; ++p) sink_logits.push_back({p, scaled_logit(q, store, p)});
  return attention_output(store, selected, sink_logits);
}

void work_and_throughput() {
  const auto t0 = Clock::now();
  constexpr std::size_t kWarm = 64, kMeasured = 32;
  SyntheticSpec spec;
  spec.n_prefill = 65536;
  spec.steps = kWarm + kMeasured;
  spec.d = 64;
  spec.prefill_window = 32;
  spec.vertical_positions = {2400, 20000, 48000};
  spec.slash_offsets = {64, 700};
  spec.seed = 505;
  const TraceFile trace = gen_synthetic(spec);
  LfpsConfig c;
  c.d = 64;
  c.s = 32;
  c.sink_count = 4;
  HeadSession session = bootstrap_head(trace, 0, c);
  const HeadTrace& h = trace.heads[0];

  std::size_t counter_mismatch = 0, steps = 0;
  std::vector<double> ratios, fractions;
  double lfps_total = 0.0, exact_total = 0.0;
  IndexSet all;
  for (std::size_t t = 0; t < spec.steps; ++t) {
    const auto q = widen(h.queries, t, spec.d);
    const auto key = widen(h.new_keys, t, spec.d);
    const auto value = widen(h.new_values, t, spec.d);
    const std::size_t n = session.store().size();
    const bool measured = t >= kWarm;
    double exact_s = 0.0;
    if (measured) {
      while (all.size() < n - c.sink_count) all.push_back(c.sink_count + all.size());
      const auto e0 = Clock::now();
      volatile double sink = exact_topk_step(q, session.store(), resolve_budget(0.02, n),
                                             c.sink_count, all).output[0];
      (void)sink;
      exact_s = seconds_since(e0);
    }
    const std::uint64_t before = dot_call_count();
    const auto l0 = Clock::now();
    StepResult r = session.decode_step(q, key, value, 0.02);
    const double lfps_s = seconds_since(l0);
    const std::uint64_t counted = dot_call_count() - before;
    ++steps;
    // Probe work is |C1 u local| logits; the gate adds sinks, local and the mean key.
    const std::size_t gate = c.sink_count + c.local_window + 1;
    const std::size_t probe = r.bypassed ? 0 : r.probe_size;
    if (r.probe_dots != probe || r.gate_dots != gate || counted != probe + gate) {
      ++counter_mismatch;
    }
    if (measured) {
      ratios.push_back(exact_s / lfps_s);
      lfps_total += lfps_s;
      exact_total += exact_s;
      fractions.push_back(r.bypassed ? 0.0
                                     : static_cast<double>(r.candidates.c1.size()) /
                                           static_cast<double>(n));
    }
  }
  const double mean_fraction =
      std::accumulate(fractions.begin(), fractions.end(), 0.0) / static_cast<double>(fractions.size());
  const double speedup = median(ratios);
  const double secs = seconds_since(t0);
  report("work_counter", counter_mismatch == 0,
         fmt("%zu steps, %zu counter mismatches", steps, counter_mismatch));
  report("throughput", mean_fraction <= 0.05 && speedup >= 5.0 && secs < 120.0,
         fmt("n=65536 after %zu warm-up steps: candidate fraction %.4f, median speedup %.2fx "
             "(mean step %.3f ms vs exact %.3f ms), %.1f s",
             kWarm, mean_fraction, speedup, 1e3 * lfps_total / kMeasured,
             1e3 * exact_total / kMeasured, secs));
}

// ---------------------------------------------------------------------------

double table_update_seconds(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LfpsConfig c;
  c.s = 4;
  c.sink_count = 4;
  std::vector<std::vector<double>> w;
  for (std::size_t j = 0; j < c.s; ++j) w.push_back(simplex(rng, m));
  ScoreTablePair t = ScoreTablePair::init(w, c);
  t.reserve(m + 1000);
  // Weight vectors are prepared up front so only update + grow is timed.
  std::vector<IndexedValues> steps;
  std::uniform_int_distribution<std::size_t> pos(0, m - 1);
  for (int s = 0; s < 1000; ++s) {
    std::vector<std::size_t> p;
    while (p.size() < 64) {
      p.push_back(pos(rng));
      std::sort(p.begin(), p.end());
      p.erase(std::unique(p.begin(), p.end()), p.end());
    }
    const auto v = simplex(rng, 64);
    IndexedValues iv;
    for (std::size_t i = 0; i < 64; ++i) iv.push_back({p[i] + c.sink_count, v[i]});
    steps.push_back(std::move(iv));
  }
  const auto t0 = Clock::now();
  for (const auto& iv : steps) {
    t.update(iv);
    t.grow();
  }
  return seconds_since(t0);
}

void slash_shift_cost() {
  // Best of five to damp scheduler noise.
  double small = 1e9, large = 1e9;
  for (int rep = 0; rep < 5; ++rep) {
    small = std::min(small, table_update_seconds(4096, 600 + rep));
    large = std::min(large, table_update_seconds(65536, 700 + rep));
  }
  const double ratio = large / small;
  report("slash_shift_cost", ratio <= 2.0,
         fmt("1000 updates: %.1f us at m=4096, %.1f us at m=65536, ratio %.2f", small * 1e6,
             large * 1e6, ratio));
}

// ---------------------------------------------------------------------------

std::vector<float> float_bits(std::mt19937_64& rng, std::size_t count) {
  std::vector<float> v(count);
  for (auto& x : v) {
    const auto b = static_cast<std::uint32_t>(rng());
    std::memcpy(&x, &b, sizeof b);
  }
  return v;
}

TraceFile random_trace(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  TraceFile t;
  t.header.layers = pick(1, 3);
  t.header.heads = pick(1, 3);
  t.header.d = pick(1, 8);
  t.header.sink_count = pick(0, 4);
  t.header.n_prefill = t.header.sink_count + pick(1, 12);
  t.header.steps = pick(0, 5);
  t.header.prefill_window = pick(0, 4);
  const std::size_t d = t.header.d, n = t.header.n_prefill, steps = t.header.steps;
  for (std::size_t i = 0; i < t.header.head_count(); ++i) {
    HeadTrace h;
    h.weight_scale = float_bits(rng, 1)[0];
    h.keys = float_bits(rng, n * d);
    h.values = float_bits(rng, n * d);
    h.weights = float_bits(rng, t.header.prefill_window * t.header.weight_length());
    h.last_query = float_bits(rng, d);
    h.queries = float_bits(rng, steps * d);
    h.new_keys = float_bits(rng, steps * d);
    h.new_values = float_bits(rng, steps * d);
    t.heads.push_back(std::move(h));
  }
  return t;
}

void trace_format() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(909);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const TraceFile t = random_trace(rng);
    const auto bytes = write_trace(t);
    try {
      const TraceFile back = read_trace(bytes);
      if (!back.identical(t) || write_trace(back) != bytes) ++mismatches;
    } catch (const Error&) {
      ++mismatches;
    }
  }

  // Every byte of a small valid file, replaced by every other value.
  SyntheticSpec s;
  s.n_prefill = 12;
  s.steps = 2;
  s.d = 2;
  s.prefill_window = 2;
  s.sink_count = 2;
  s.vertical_positions = {5};
  const auto valid = write_trace(gen_synthetic(s));
  std::map<Errc, std::size_t> codes;
  std::size_t accepted = 0, corruptions = 0;
  auto bytes = valid;
  for (std::size_t at = 0; at < bytes.size(); ++at) {
    const std::uint8_t original = bytes[at];
    for (int v = 0; v < 256; ++v) {
      if (v == original) continue;
      bytes[at] = static_cast<std::uint8_t>(v);
      ++corruptions;
      try {
        read_trace(bytes);
        ++accepted;
      } catch (const Error& e) {
        ++codes[e.code()];
      }
    }
    bytes[at] = original;
  }
  std::string by_code;
  for (const auto& [code, count] : codes) by_code += fmt("%s %zu, ", errc_name(code), count);
  report("trace_format", mismatches == 0 && accepted == 0,
         fmt("10000 roundtrips, %d mismatches; %zu corruptions of a %zu-byte file, %zu accepted "
             "(%s%.1f s)",
             mismatches, corruptions, valid.size(), accepted, by_code.c_str(), seconds_since(t0)));
}

}  // namespace

int main() {
  try {
    conservation();
    oracle_equivalence();
    const TraceFile overlap_trace = gen_synthetic(overlap_spec());
    overlap_and_expansion(overlap_trace);
    candidate_fraction(overlap_trace);
    bypass_monotonicity();
    work_and_throughput();
    slash_shift_cost();
    trace_format();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
