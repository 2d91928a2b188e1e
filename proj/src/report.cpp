#include "lfps/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include "json.hpp"
#include <sstream>
#include <thread>

#include "lfps/attention.hpp"
#include "lfps/engine.hpp"
#include "lfps/error.hpp"

namespace lfps {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::int64_t ns_since(Clock::time_point from) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - from).count();
}

std::vector<double> widen(const float* p, std::size_t n) { return {p, p + n}; }

struct HeadOutcome {
  std::vector<StepRecord> records;
  std::uint64_t oracle_calls = 0;
  std::uint64_t clamps = 0;
  std::uint64_t c0_not_in_c1 = 0;
  std::optional<TableSnapshot> snapshot;
  std::string error;
};

// Exact Top-k over every non-sink position followed by the output; this is
// the step LFPS is compared against for throughput.
AttentionOutput exact_topk_step(std::span<const double> q, const KvStore& store, std::size_t k,
                                const LfpsConfig& config) {
  const std::size_t n = store.size();
  IndexSet all;
  all.reserve(n - config.sink_count);
  for (std::size_t p = config.sink_count; p < n; ++p) all.push_back(p);
  const IndexedValues selected = exact_topk_restricted(q, store, all, k);
  IndexedValues sinks;
  for (std::size_t p = 0; p < config.sink_count; ++p) sinks.push_back({p, scaled_logit(q, store, p)});
  return attention_output(store, selected, sinks);
}

HeadOutcome run_head(const TraceFile& trace, std::size_t head_index, const RunOptions& options,
                     const LfpsConfig& config) {
  HeadOutcome outcome;
  const TraceHeader& h = trace.header;
  const HeadTrace& ht = trace.heads[head_index];
  const std::size_t d = h.d;

  HeadSession session = bootstrap_head(trace, head_index, config);
  // The reference modes only need the store.
  KvStore store = session.store();

  outcome.records.reserve(h.steps);
  for (std::size_t t = 0; t < h.steps; ++t) {
    const std::vector<double> q = widen(ht.queries.data() + t * d, d);
    const std::vector<double> key = widen(ht.new_keys.data() + t * d, d);
    const std::vector<double> value = widen(ht.new_values.data() + t * d, d);

    const KvStore& current = options.mode == RunMode::lfps ? session.store() : store;
    const std::size_t n = current.size();
    const std::size_t k = std::min(resolve_budget(options.k_fraction, n), n - config.sink_count);

    StepRecord rec;
    rec.layer = head_index / h.heads;
    rec.head = head_index % h.heads;
    rec.step = t;
    rec.n = n;
    rec.k = k;
    rec.eta = kNaN;
    rec.output_error = kNaN;

    IndexSet exact;
    AttentionOutput full;
    if (options.oracle) {
      exact = topk_oracle(q, current, k, config.sink_count);
      full = full_attention_oracle(q, current);
      outcome.oracle_calls += 2;
    }

    switch (options.mode) {
      case RunMode::lfps: {
        if (options.oracle) {
          auto t0 = Clock::now();
          (void)exact_topk_step(q, current, k, config);
          rec.reference_ns = ns_since(t0);
          ++outcome.oracle_calls;
        }
        auto t0 = Clock::now();
        StepResult res = session.decode_step(q, key, value, options.k_fraction);
        rec.step_ns = ns_since(t0);
        rec.bypassed = res.bypassed;
        rec.rho = res.rho;
        rec.c0 = res.candidates.c0.size();
        rec.c1 = res.candidates.c1.size();
        rec.probe = res.probe_size;
        rec.candidate_fraction = res.bypassed ? 0.0 : static_cast<double>(rec.c1) / static_cast<double>(n);
        rec.dot_products = res.gate_dots + res.probe_dots;
        rec.gate_ns = res.timings.gate_ns;
        rec.select_ns = res.timings.threshold_ns + res.timings.select_ns + res.timings.expand_ns;
        rec.topk_ns = res.timings.topk_ns;
        rec.output_ns = res.timings.output_ns;
        rec.update_ns = res.timings.update_ns;
        outcome.clamps += res.clamps;
        outcome.c0_not_in_c1 += res.c0_not_in_c1;
        if (options.oracle) {
          if (!res.bypassed) rec.eta = overlap_ratio(res.candidates.c2, exact, k).eta;
          rec.output_error = output_error(res.output, full.output);
        }
        break;
      }
      case RunMode::topk_oracle: {
        auto t0 = Clock::now();
        AttentionOutput out = exact_topk_step(q, store, k, config);
        rec.step_ns = ns_since(t0);
        rec.reference_ns = rec.step_ns;
        rec.probe = n - config.sink_count;
        rec.c1 = rec.probe;
        rec.candidate_fraction = static_cast<double>(rec.c1) / static_cast<double>(n);
        rec.dot_products = n;
        if (options.oracle) {
          IndexSet chosen;
          for (const auto& w : out.weights) {
            if (w.index >= config.sink_count) chosen.push_back(w.index);
          }
          rec.eta = overlap_ratio(chosen, exact, k).eta;
          rec.output_error = output_error(out.output, full.output);
        }
        store.append(key, value);
        break;
      }
      case RunMode::full: {
        auto t0 = Clock::now();
        AttentionOutput out = full_attention_oracle(q, store);
        rec.step_ns = ns_since(t0);
        rec.probe = n;
        rec.c1 = n - config.sink_count;
        rec.candidate_fraction = static_cast<double>(rec.c1) / static_cast<double>(n);
        rec.dot_products = n;
        if (options.oracle) rec.output_error = output_error(out.output, full.output);
        store.append(key, value);
        break;
      }
    }
    outcome.records.push_back(rec);
  }
  if (options.snapshot && options.mode == RunMode::lfps) {
    TableSnapshot snap;
    snap.layer = head_index / h.heads;
    snap.head = head_index % h.heads;
    snap.first_position = session.tables().first_position();
    snap.ver = session.tables().ver_values();
    snap.sla = session.tables().sla_values();
    outcome.snapshot = std::move(snap);
  }
  return outcome;
}

void append_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void append_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_number(out, v[i]);
  }
  out += ']';
}

template <class Int>
void append_int(std::string& out, Int v) {
  out += std::to_string(v);
}

class ObjectWriter {
 public:
  ObjectWriter(std::string& out, std::string indent, bool multiline)
      : out_(out), indent_(std::move(indent)), multiline_(multiline) {
    out_ += '{';
  }
  std::string& key(const char* name) {
    if (!first_) out_ += ',';
    first_ = false;
    if (multiline_) {
      out_ += '\n';
      out_ += indent_;
      out_ += "  ";
    }
    out_ += '"';
    out_ += name;
    out_ += "\":";
    if (multiline_) out_ += ' ';
    return out_;
  }
  void num(const char* name, double v) { append_number(key(name), v); }
  template <class Int>
  void integer(const char* name, Int v) {
    append_int(key(name), v);
  }
  void boolean(const char* name, bool v) { key(name) += v ? "true" : "false"; }
  void str(const char* name, const std::string& v) { key(name) += '"' + v + '"'; }
  void close() {
    if (multiline_) {
      out_ += '\n';
      out_ += indent_;
    }
    out_ += '}';
  }

 private:
  std::string& out_;
  std::string indent_;
  bool multiline_;
  bool first_ = true;
};

const char* bypass_mode_name(BypassMode m) {
  return m == BypassMode::mean_only ? "mean_only" : "sink_average";
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

}  // namespace

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::lfps: return "lfps";
    case RunMode::topk_oracle: return "topk_oracle";
    case RunMode::full: return "full";
  }
  return "lfps";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "lfps") return RunMode::lfps;
  if (name == "topk_oracle") return RunMode::topk_oracle;
  if (name == "full") return RunMode::full;
  throw Error(Errc::invalid_argument, "unknown run mode '" + name + "'");
}

LfpsConfig resolve_config(const TraceHeader& h, LfpsConfig config) {
  auto adopt = [](std::size_t& field, std::uint64_t from_trace, const char* name) {
    if (field == 0) {
      field = from_trace;
    } else if (field != from_trace) {
      throw Error(Errc::dimension_mismatch, std::string("config ") + name + "=" +
                                                std::to_string(field) + " but trace has " +
                                                std::to_string(from_trace));
    }
  };
  adopt(config.d, h.d, "d");
  adopt(config.s, h.prefill_window, "s");
  adopt(config.sink_count, h.sink_count, "sink_count");
  config.validate();
  if (h.n_prefill <= config.sink_count + std::max(config.s, config.local_window)) {
    throw Error(Errc::invalid_argument, "trace prefill too short for sink_count, s and local_window");
  }
  return config;
}

HeadSession bootstrap_head(const TraceFile& trace, std::size_t head_index,
                          const LfpsConfig& config) {
  if (head_index >= trace.heads.size()) {
    throw Error(Errc::invalid_argument, "head index out of range");
  }
  const TraceHeader& h = trace.header;
  const HeadTrace& ht = trace.heads[head_index];
  const std::size_t d = h.d;
  const std::size_t width = h.weight_length();
  std::vector<std::vector<double>> weights(h.prefill_window);
  for (std::size_t j = 0; j < h.prefill_window; ++j) {
    weights[j] = widen(ht.weights.data() + j * width, width);
  }
  const std::vector<double> keys = widen(ht.keys.data(), ht.keys.size());
  const std::vector<double> values = widen(ht.values.data(), ht.values.size());
  const std::vector<double> last_query = widen(ht.last_query.data(), d);
  return prefill_bootstrap(keys, values, weights, last_query, config);
}

RunReport run_trace(const TraceFile& trace, const RunOptions& options) {
  trace.validate();
  const TraceHeader& h = trace.header;
  const LfpsConfig config = resolve_config(h, options.config);
  if (!(options.k_fraction > 0.0 && options.k_fraction <= 1.0)) {
    throw Error(Errc::invalid_argument, "budget fraction must lie in (0, 1]");
  }

  const std::size_t head_count = trace.heads.size();
  std::vector<HeadOutcome> outcomes(head_count);
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, head_count));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < head_count; i = next.fetch_add(1)) {
      try {
        outcomes[i] = run_head(trace, i, options, config);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  RunReport report;
  report.mode = run_mode_name(options.mode);
  report.k_fraction = options.k_fraction;
  report.config = config;
  report.oracle = options.oracle;
  report.threads = workers;
  report.trace = h;
  Aggregates counters;
  for (std::size_t i = 0; i < head_count; ++i) {
    auto& o = outcomes[i];
    if (!o.error.empty()) {
      throw Error(Errc::invalid_state, "head " + std::to_string(i) + ": " + o.error);
    }
    counters.oracle_calls += o.oracle_calls;
    counters.table_clamps += o.clamps;
    counters.c0_not_in_c1 += o.c0_not_in_c1;
    report.records.insert(report.records.end(), o.records.begin(), o.records.end());
    if (o.snapshot) report.snapshots.push_back(std::move(*o.snapshot));
  }
  report.aggregates = aggregate(report.records, head_count, counters);
  return report;
}

Aggregates aggregate(const std::vector<StepRecord>& records, std::uint64_t head_count,
                     Aggregates counters) {
  Aggregates a;
  a.oracle_calls = counters.oracle_calls;
  a.table_clamps = counters.table_clamps;
  a.c0_not_in_c1 = counters.c0_not_in_c1;
  a.records = records.size();
  if (records.empty()) return a;

  std::vector<double> etas;
  double fraction_sum = 0.0, error_sum = 0.0;
  std::size_t selected = 0, bypassed = 0, errors = 0, referenced = 0;
  double step_seconds = 0.0, reference_seconds = 0.0;
  for (const auto& r : records) {
    if (std::isfinite(r.eta)) etas.push_back(r.eta);
    if (r.bypassed) {
      ++bypassed;
    } else {
      ++selected;
      fraction_sum += r.candidate_fraction;
    }
    if (std::isfinite(r.output_error)) {
      ++errors;
      error_sum += r.output_error;
    }
    step_seconds += static_cast<double>(r.step_ns) * 1e-9;
    if (r.reference_ns > 0) {
      ++referenced;
      reference_seconds += static_cast<double>(r.reference_ns) * 1e-9;
    }
  }
  // Unscored runs (no oracle, or every step bypassed) report null, not zero.
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  a.mean_eta = a.median_eta = a.mean_output_error = kNaN;
  if (!etas.empty()) {
    double sum = 0.0;
    for (double e : etas) sum += e;
    a.mean_eta = sum / static_cast<double>(etas.size());
    a.median_eta = median(etas);
  }
  if (selected) a.mean_candidate_fraction = fraction_sum / static_cast<double>(selected);
  a.bypass_rate = static_cast<double>(bypassed) / static_cast<double>(records.size());
  if (errors) a.mean_output_error = error_sum / static_cast<double>(errors);
  const double heads = static_cast<double>(std::max<std::uint64_t>(1, head_count));
  if (step_seconds > 0.0) {
    a.steps_per_sec_per_head = static_cast<double>(records.size()) / step_seconds;
    a.tokens_per_sec = a.steps_per_sec_per_head / heads;
  }
  if (reference_seconds > 0.0) {
    a.reference_steps_per_sec_per_head = static_cast<double>(referenced) / reference_seconds;
    a.reference_tokens_per_sec = a.reference_steps_per_sec_per_head / heads;
  }
  return a;
}

std::string emit_json(const RunReport& report) {
  std::string out;
  ObjectWriter root(out, "", true);
  root.integer("schema_version", report.schema_version);
  root.str("mode", report.mode);
  root.num("k_fraction", report.k_fraction);
  root.boolean("oracle", report.oracle);
  root.integer("threads", report.threads);
  {
    ObjectWriter c(root.key("config"), "  ", true);
    const LfpsConfig& cfg = report.config;
    c.integer("d", cfg.d);
    c.integer("s", cfg.s);
    c.num("r", cfg.r);
    c.num("epsilon", cfg.epsilon);
    c.num("a", cfg.a);
    std::string& offsets = c.key("expansion_offsets");
    offsets += '[';
    for (std::size_t i = 0; i < cfg.expansion_offsets.size(); ++i) {
      if (i) offsets += ',';
      offsets += std::to_string(cfg.expansion_offsets[i]);
    }
    offsets += ']';
    c.integer("sink_count", cfg.sink_count);
    c.integer("local_window", cfg.local_window);
    c.str("tie_break", "lower_index");
    c.str("bypass_mode", bypass_mode_name(cfg.bypass_mode));
    c.boolean("exhaustive_fallback", cfg.exhaustive_fallback);
    c.close();
  }
  {
    ObjectWriter t(root.key("trace"), "  ", true);
    const TraceHeader& h = report.trace;
    t.integer("layers", h.layers);
    t.integer("heads", h.heads);
    t.integer("d", h.d);
    t.integer("n_prefill", h.n_prefill);
    t.integer("steps", h.steps);
    t.integer("prefill_window", h.prefill_window);
    t.integer("sink_count", h.sink_count);
    t.close();
  }
  {
    ObjectWriter a(root.key("aggregates"), "  ", true);
    const Aggregates& g = report.aggregates;
    a.integer("records", g.records);
    a.num("mean_eta", g.mean_eta);
    a.num("median_eta", g.median_eta);
    a.num("mean_candidate_fraction", g.mean_candidate_fraction);
    a.num("bypass_rate", g.bypass_rate);
    a.num("mean_output_error", g.mean_output_error);
    a.num("steps_per_sec_per_head", g.steps_per_sec_per_head);
    a.num("tokens_per_sec", g.tokens_per_sec);
    a.num("reference_steps_per_sec_per_head", g.reference_steps_per_sec_per_head);
    a.num("reference_tokens_per_sec", g.reference_tokens_per_sec);
    a.integer("oracle_calls", g.oracle_calls);
    a.integer("table_clamps", g.table_clamps);
    a.integer("c0_not_in_c1", g.c0_not_in_c1);
    a.close();
  }
  std::string& recs = root.key("records");
  recs += '[';
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const StepRecord& r = report.records[i];
    recs += i ? ",\n    " : "\n    ";
    ObjectWriter o(recs, "", false);
    o.integer("layer", r.layer);
    o.integer("head", r.head);
    o.integer("step", r.step);
    o.integer("n", r.n);
    o.integer("k", r.k);
    o.num("eta", r.eta);
    o.integer("c0", r.c0);
    o.integer("c1", r.c1);
    o.integer("probe", r.probe);
    o.num("candidate_fraction", r.candidate_fraction);
    o.boolean("bypassed", r.bypassed);
    o.num("rho", r.rho);
    o.num("output_error", r.output_error);
    o.integer("dot_products", r.dot_products);
    o.integer("gate_ns", r.gate_ns);
    o.integer("select_ns", r.select_ns);
    o.integer("topk_ns", r.topk_ns);
    o.integer("output_ns", r.output_ns);
    o.integer("update_ns", r.update_ns);
    o.integer("step_ns", r.step_ns);
    o.integer("reference_ns", r.reference_ns);
    o.close();
  }
  recs += report.records.empty() ? "]" : "\n  ]";
  std::string& snaps = root.key("snapshots");
  snaps += '[';
  for (std::size_t i = 0; i < report.snapshots.size(); ++i) {
    const TableSnapshot& t = report.snapshots[i];
    snaps += i ? ",\n    " : "\n    ";
    ObjectWriter o(snaps, "", false);
    o.integer("layer", t.layer);
    o.integer("head", t.head);
    o.integer("first_position", t.first_position);
    append_array(o.key("ver"), t.ver);
    append_array(o.key("sla"), t.sla);
    o.close();
  }
  snaps += report.snapshots.empty() ? "]" : "\n  ]";
  root.close();
  out += '\n';
  return out;
}

std::string emit_csv(const RunReport& report) {
  std::string out =
      "layer,head,step,n,k,eta,c0,c1,probe,candidate_fraction,bypassed,rho,output_error,"
      "dot_products,gate_ns,select_ns,topk_ns,output_ns,update_ns,step_ns,reference_ns\n";
  auto num = [&](double v) {
    if (std::isfinite(v)) append_number(out, v);
  };
  for (const StepRecord& r : report.records) {
    out += std::to_string(r.layer) + ',' + std::to_string(r.head) + ',' + std::to_string(r.step) +
           ',' + std::to_string(r.n) + ',' + std::to_string(r.k) + ',';
    num(r.eta);
    out += ',' + std::to_string(r.c0) + ',' + std::to_string(r.c1) + ',' + std::to_string(r.probe) + ',';
    num(r.candidate_fraction);
    out += r.bypassed ? ",1," : ",0,";
    num(r.rho);
    out += ',';
    num(r.output_error);
    out += ',' + std::to_string(r.dot_products) + ',' + std::to_string(r.gate_ns) + ',' +
           std::to_string(r.select_ns) + ',' + std::to_string(r.topk_ns) + ',' +
           std::to_string(r.output_ns) + ',' + std::to_string(r.update_ns) + ',' +
           std::to_string(r.step_ns) + ',' + std::to_string(r.reference_ns) + '\n';
  }
  return out;
}

RunReport parse_report_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::structure, std::string("report: ") + e.what());
  }
  try {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw Error(Errc::bad_version, "report: unsupported schema version");
    }
    r.mode = j.at("mode").get<std::string>();
    r.k_fraction = number_or_nan(j.at("k_fraction"));
    r.oracle = j.at("oracle").get<bool>();
    r.threads = j.at("threads").get<std::uint64_t>();
    const auto& c = j.at("config");
    r.config.d = c.at("d").get<std::size_t>();
    r.config.s = c.at("s").get<std::size_t>();
    r.config.r = number_or_nan(c.at("r"));
    r.config.epsilon = number_or_nan(c.at("epsilon"));
    r.config.a = number_or_nan(c.at("a"));
    r.config.expansion_offsets = c.at("expansion_offsets").get<std::vector<std::int64_t>>();
    r.config.sink_count = c.at("sink_count").get<std::size_t>();
    r.config.local_window = c.at("local_window").get<std::size_t>();
    r.config.bypass_mode = c.at("bypass_mode").get<std::string>() == "mean_only"
                               ? BypassMode::mean_only
                               : BypassMode::sink_average;
    r.config.exhaustive_fallback = c.at("exhaustive_fallback").get<bool>();
    const auto& t = j.at("trace");
    r.trace.layers = t.at("layers").get<std::uint64_t>();
    r.trace.heads = t.at("heads").get<std::uint64_t>();
    r.trace.d = t.at("d").get<std::uint64_t>();
    r.trace.n_prefill = t.at("n_prefill").get<std::uint64_t>();
    r.trace.steps = t.at("steps").get<std::uint64_t>();
    r.trace.prefill_window = t.at("prefill_window").get<std::uint64_t>();
    r.trace.sink_count = t.at("sink_count").get<std::uint64_t>();
    const auto& a = j.at("aggregates");
    Aggregates& g = r.aggregates;
    g.records = a.at("records").get<std::uint64_t>();
    g.mean_eta = number_or_nan(a.at("mean_eta"));
    g.median_eta = number_or_nan(a.at("median_eta"));
    g.mean_candidate_fraction = number_or_nan(a.at("mean_candidate_fraction"));
    g.bypass_rate = number_or_nan(a.at("bypass_rate"));
    g.mean_output_error = number_or_nan(a.at("mean_output_error"));
    g.steps_per_sec_per_head = number_or_nan(a.at("steps_per_sec_per_head"));
    g.tokens_per_sec = number_or_nan(a.at("tokens_per_sec"));
    g.reference_steps_per_sec_per_head = number_or_nan(a.at("reference_steps_per_sec_per_head"));
    g.reference_tokens_per_sec = number_or_nan(a.at("reference_tokens_per_sec"));
    g.oracle_calls = a.at("oracle_calls").get<std::uint64_t>();
    g.table_clamps = a.at("table_clamps").get<std::uint64_t>();
    g.c0_not_in_c1 = a.at("c0_not_in_c1").get<std::uint64_t>();
    for (const auto& o : j.at("records")) {
      StepRecord s;
      s.layer = o.at("layer").get<std::uint64_t>();
      s.head = o.at("head").get<std::uint64_t>();
      s.step = o.at("step").get<std::uint64_t>();
      s.n = o.at("n").get<std::uint64_t>();
      s.k = o.at("k").get<std::uint64_t>();
      s.eta = number_or_nan(o.at("eta"));
      s.c0 = o.at("c0").get<std::uint64_t>();
      s.c1 = o.at("c1").get<std::uint64_t>();
      s.probe = o.at("probe").get<std::uint64_t>();
      s.candidate_fraction = number_or_nan(o.at("candidate_fraction"));
      s.bypassed = o.at("bypassed").get<bool>();
      s.rho = number_or_nan(o.at("rho"));
      s.output_error = number_or_nan(o.at("output_error"));
      s.dot_products = o.at("dot_products").get<std::uint64_t>();
      s.gate_ns = o.at("gate_ns").get<std::int64_t>();
      s.select_ns = o.at("select_ns").get<std::int64_t>();
      s.topk_ns = o.at("topk_ns").get<std::int64_t>();
      s.output_ns = o.at("output_ns").get<std::int64_t>();
      s.update_ns = o.at("update_ns").get<std::int64_t>();
      s.step_ns = o.at("step_ns").get<std::int64_t>();
      s.reference_ns = o.at("reference_ns").get<std::int64_t>();
      r.records.push_back(s);
    }
    for (const auto& o : j.at("snapshots")) {
      TableSnapshot t;
      t.layer = o.at("layer").get<std::uint64_t>();
      t.head = o.at("head").get<std::uint64_t>();
      t.first_position = o.at("first_position").get<std::uint64_t>();
      for (const auto& v : o.at("ver")) t.ver.push_back(number_or_nan(v));
      for (const auto& v : o.at("sla")) t.sla.push_back(number_or_nan(v));
      r.snapshots.push_back(std::move(t));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::structure, std::string("report: ") + e.what());
  }
}

}  // namespace lfps
