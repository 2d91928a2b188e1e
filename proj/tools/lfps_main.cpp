// lfps_bench: generate synthetic traces, run LFPS against exact references,
// sweep parameters. Talks to the library only through the C API.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lfps/lfps.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliFailure {
  int code;
  std::string message;
};

void check(lfps_status status, const char* what) {
  if (status == LFPS_OK) return;
  const int code = status == LFPS_E_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
  throw CliFailure{code, std::string(what) + ": " + lfps_status_name(status) + ": " +
                             lfps_last_error()};
}

using TracePtr = std::unique_ptr<lfps_trace, decltype(&lfps_trace_free)>;
using ReportPtr = std::unique_ptr<lfps_report, decltype(&lfps_report_free)>;

TracePtr load_trace(const std::string& path) {
  lfps_trace* t = nullptr;
  check(lfps_trace_read(path.c_str(), &t), "reading trace");
  return {t, lfps_trace_free};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class T, std::size_t N>
std::size_t copy_list(const std::vector<T>& src, T (&dst)[N], const char* what) {
  if (src.size() > N) {
    throw CliFailure{kExitUsage, std::string("too many values for ") + what};
  }
  std::copy(src.begin(), src.end(), dst);
  return src.size();
}

// Flags shared by run and sweep.
struct RunFlags {
  std::string trace;
  std::string mode = "lfps";
  double budget = 0.02;
  double a = 0.2;
  double epsilon = 0.85;
  double r = 0.95;
  std::size_t s = 0;
  std::size_t sinks = 0;
  std::size_t local_window = 6;
  std::vector<std::int64_t> offsets{-1, 0, 1, 2};
  std::string bypass_mode = "sink_average";
  bool exhaustive = false;
  bool no_oracle = false;
  std::size_t threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("trace", trace, "Trace file")->required();
    cmd->add_option("--budget", budget, "Top-k budget as a fraction of n")->capture_default_str();
    cmd->add_option("--a", a, "Kurtosis threshold scale")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "Bypass threshold on the sink share")
        ->capture_default_str();
    cmd->add_option("--r", r, "Score-table decay")->capture_default_str();
    cmd->add_option("--s", s, "Prefill bootstrap window (0: from trace)");
    cmd->add_option("--sinks", sinks, "Attention sink count (0: from trace)");
    cmd->add_option("--local-window", local_window, "Always-probed trailing positions")
        ->capture_default_str();
    cmd->add_option("--offsets", offsets, "Expansion offsets")->delimiter(',');
    cmd->add_option("--bypass-mode", bypass_mode, "Bypass output approximation")
        ->check(CLI::IsMember({"mean_only", "sink_average"}))
        ->capture_default_str();
    cmd->add_flag("--exhaustive", exhaustive, "Probe every non-sink position");
    cmd->add_flag("--no-oracle", no_oracle, "Skip oracle scoring (pure timing)");
    cmd->add_option("--threads", threads, "Worker threads across heads")
        ->envname("LFPS_THREADS")
        ->check(CLI::PositiveNumber);
  }

  lfps_run_options options() const {
    lfps_run_options o;
    lfps_run_options_default(&o);
    if (mode == "lfps") {
      o.mode = LFPS_MODE_LFPS;
    } else if (mode == "topk_oracle") {
      o.mode = LFPS_MODE_TOPK_ORACLE;
    } else {
      o.mode = LFPS_MODE_FULL;
    }
    o.k_fraction = budget;
    o.config.a = a;
    o.config.epsilon = epsilon;
    o.config.r = r;
    o.config.s = s;
    o.config.sink_count = sinks;
    o.config.local_window = local_window;
    o.config.offset_count = copy_list(offsets, o.config.expansion_offsets, "--offsets");
    o.config.bypass_mode =
        bypass_mode == "mean_only" ? LFPS_BYPASS_MEAN_ONLY : LFPS_BYPASS_SINK_AVERAGE;
    o.config.exhaustive_fallback = exhaustive ? 1 : 0;
    o.oracle = no_oracle ? 0 : 1;
    o.threads = threads;
    return o;
  }
};

ReportPtr execute(const lfps_trace* trace, const lfps_run_options& o) {
  lfps_report* r = nullptr;
  check(lfps_run(trace, &o, &r), "run");
  return {r, lfps_report_free};
}

void print_summary(const lfps_aggregates& a, std::FILE* out) {
  std::fprintf(out,
               "records=%llu mean_eta=%s median_eta=%s candidate_fraction=%s bypass_rate=%s "
               "output_error=%s steps/s/head=%s ref_steps/s/head=%s oracle_calls=%llu "
               "clamps=%llu\n",
               static_cast<unsigned long long>(a.records), short_fmt(a.mean_eta).c_str(),
               short_fmt(a.median_eta).c_str(), short_fmt(a.mean_candidate_fraction).c_str(),
               short_fmt(a.bypass_rate).c_str(), short_fmt(a.mean_output_error).c_str(),
               short_fmt(a.steps_per_sec_per_head).c_str(),
               short_fmt(a.reference_steps_per_sec_per_head).c_str(),
               static_cast<unsigned long long>(a.oracle_calls),
               static_cast<unsigned long long>(a.table_clamps));
}

struct GenFlags {
  std::size_t n = 0;
  std::size_t steps = 0;
  lfps_synthetic_spec spec{};
  std::vector<std::size_t> vertical;
  std::vector<std::size_t> slash;
  std::string out;
};

int cmd_gen(GenFlags& g) {
  g.spec.n_prefill = g.n;
  g.spec.steps = g.steps;
  g.spec.vertical_count = copy_list(g.vertical, g.spec.vertical_positions, "--vertical");
  g.spec.slash_count = copy_list(g.slash, g.spec.slash_offsets, "--slash");
  lfps_trace* raw = nullptr;
  check(lfps_trace_generate(&g.spec, &raw), "gen");
  TracePtr trace(raw, lfps_trace_free);
  check(lfps_trace_write(trace.get(), g.out.c_str()), "writing trace");
  lfps_trace_info info;
  check(lfps_trace_info_get(trace.get(), &info), "trace info");
  std::printf("wrote %s: layers=%llu heads=%llu d=%llu n_prefill=%llu steps=%llu s=%llu "
              "sinks=%llu bytes=%llu crc32=%08x\n",
              g.out.c_str(), static_cast<unsigned long long>(info.layers),
              static_cast<unsigned long long>(info.heads), static_cast<unsigned long long>(info.d),
              static_cast<unsigned long long>(info.n_prefill),
              static_cast<unsigned long long>(info.steps),
              static_cast<unsigned long long>(info.prefill_window),
              static_cast<unsigned long long>(info.sink_count),
              static_cast<unsigned long long>(info.byte_size), info.checksum);
  return 0;
}

int cmd_run(const RunFlags& f, const std::string& report_path, const std::string& csv_path,
            bool snapshot) {
  TracePtr trace = load_trace(f.trace);
  lfps_run_options o = f.options();
  o.snapshot = snapshot ? 1 : 0;
  ReportPtr report = execute(trace.get(), o);
  if (report_path.empty() || report_path == "-") {
    std::fputs(lfps_report_json(report.get()), stdout);
  } else {
    check(lfps_report_write_json(report.get(), report_path.c_str()), "writing report");
  }
  if (!csv_path.empty()) check(lfps_report_write_csv(report.get(), csv_path.c_str()), "writing csv");
  lfps_aggregates a;
  check(lfps_report_aggregates(report.get(), &a), "aggregates");
  print_summary(a, stderr);
  return 0;
}

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct SweepRow {
  std::map<std::string, double> point;
  lfps_aggregates agg;
};

// Checks that `metric` does not increase along `axis` with the other axis held fixed.
bool non_increasing(const std::vector<SweepRow>& rows, const std::string& axis,
                    double (*metric)(const lfps_aggregates&)) {
  std::map<std::vector<std::pair<std::string, double>>, std::vector<std::pair<double, double>>>
      lines;
  for (const auto& row : rows) {
    std::vector<std::pair<std::string, double>> key;
    for (const auto& [name, v] : row.point) {
      if (name != axis) key.emplace_back(name, v);
    }
    lines[key].emplace_back(row.point.at(axis), metric(row.agg));
  }
  for (auto& [key, pts] : lines) {
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].second > pts[i - 1].second) return false;
    }
  }
  return true;
}

int cmd_sweep(RunFlags f, const std::vector<SweepAxis>& given, const std::string& csv_path) {
  std::vector<SweepAxis> axes;
  for (const auto& ax : given) {
    if (!ax.values.empty()) axes.push_back(ax);
  }
  if (axes.empty()) throw CliFailure{kExitUsage, "sweep: empty grid (give --grid-a, --grid-epsilon, --grid-budget or --grid-r)"};
  if (axes.size() > 2) throw CliFailure{kExitUsage, "sweep: at most two axes"};

  TracePtr trace = load_trace(f.trace);
  std::vector<SweepRow> rows;
  const std::size_t outer = axes[0].values.size();
  const std::size_t inner = axes.size() > 1 ? axes[1].values.size() : 1;
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t j = 0; j < inner; ++j) {
      RunFlags point = f;
      SweepRow row;
      for (std::size_t k = 0; k < axes.size(); ++k) {
        const double v = axes[k].values[k == 0 ? i : j];
        row.point[axes[k].name] = v;
        if (axes[k].name == "a") point.a = v;
        if (axes[k].name == "epsilon") point.epsilon = v;
        if (axes[k].name == "budget") point.budget = v;
        if (axes[k].name == "r") point.r = v;
      }
      ReportPtr report = execute(trace.get(), point.options());
      check(lfps_report_aggregates(report.get(), &row.agg), "aggregates");
      rows.push_back(row);
    }
  }

  std::ostringstream csv;
  for (const auto& ax : axes) csv << ax.name << ',';
  csv << "records,mean_eta,median_eta,mean_candidate_fraction,bypass_rate,mean_output_error,"
         "steps_per_sec_per_head,tokens_per_sec,reference_steps_per_sec_per_head,"
         "reference_tokens_per_sec\n";
  for (const auto& row : rows) {
    for (const auto& ax : axes) csv << fmt(row.point.at(ax.name)) << ',';
    const lfps_aggregates& a = row.agg;
    csv << a.records << ',' << fmt(a.mean_eta) << ',' << fmt(a.median_eta) << ','
        << fmt(a.mean_candidate_fraction) << ',' << fmt(a.bypass_rate) << ','
        << fmt(a.mean_output_error) << ',' << fmt(a.steps_per_sec_per_head) << ','
        << fmt(a.tokens_per_sec) << ',' << fmt(a.reference_steps_per_sec_per_head) << ','
        << fmt(a.reference_tokens_per_sec) << '\n';
  }
  if (csv_path.empty() || csv_path == "-") {
    std::fputs(csv.str().c_str(), stdout);
  } else {
    std::ofstream out(csv_path, std::ios::binary);
    out << csv.str();
    if (!out) throw CliFailure{kExitRuntime, "cannot write " + csv_path};
  }

  for (const auto& ax : axes) {
    if (ax.name == "a") {
      const bool ok = non_increasing(rows, "a", [](const lfps_aggregates& a) {
        return a.mean_candidate_fraction;
      });
      std::fprintf(stderr, "candidate fraction vs a: %s\n", ok ? "non-increasing" : "VIOLATED");
    }
    if (ax.name == "epsilon") {
      const bool ok = non_increasing(rows, "epsilon", [](const lfps_aggregates& a) {
        return a.bypass_rate;
      });
      std::fprintf(stderr, "bypass rate vs epsilon: %s\n", ok ? "non-increasing" : "VIOLATED");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LFPS sparse-indexing benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lfps_version()));

  GenFlags gen;
  lfps_synthetic_default(&gen.spec);
  auto* g = app.add_subcommand("gen", "Generate a synthetic trace with planted patterns");
  g->add_option("--n", gen.n, "Prefill length")->required();
  g->add_option("--steps", gen.steps, "Decoding steps")->required();
  g->add_option("--d", gen.spec.d, "Head dimension")->capture_default_str();
  g->add_option("--layers", gen.spec.layers, "Layers")->capture_default_str();
  g->add_option("--heads", gen.spec.heads, "Heads per layer")->capture_default_str();
  g->add_option("--s", gen.spec.prefill_window, "Recorded prefill attention rows")
      ->capture_default_str();
  g->add_option("--sinks", gen.spec.sink_count, "Attention sinks")->capture_default_str();
  g->add_option("--vertical", gen.vertical, "Planted vertical positions")->delimiter(',');
  g->add_option("--slash", gen.slash, "Planted slash offsets")->delimiter(',');
  g->add_option("--slash-band", gen.spec.slash_band, "Slash diagonal width")
      ->capture_default_str();
  g->add_option("--gain", gen.spec.signal_gain, "Vertical logit boost")->capture_default_str();
  g->add_option("--slash-gain", gen.spec.slash_gain, "Slash logit boost")->capture_default_str();
  g->add_option("--noise", gen.spec.noise_scale, "Key/value noise scale")->capture_default_str();
  g->add_option("--coherence", gen.spec.query_coherence, "Query coherence across steps")
      ->capture_default_str();
  g->add_option("--strength", gen.spec.pattern_strength, "Clustered importance strength")
      ->capture_default_str();
  g->add_option("--cluster-width", gen.spec.cluster_width, "Importance smoothing width")
      ->capture_default_str();
  g->add_option("--sink-gain", gen.spec.sink_gain, "Sink logit boost (scaled per head)")
      ->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "RNG seed")->capture_default_str();
  g->add_option("-o,--output", gen.out, "Output trace path")->required();

  RunFlags run;
  std::string report_path;
  std::string run_csv;
  bool snapshot = false;
  auto* r = app.add_subcommand("run", "Run a pipeline over every head and step of a trace");
  run.attach(r);
  r->add_option("--mode", run.mode, "Pipeline")
      ->check(CLI::IsMember({"lfps", "topk_oracle", "full"}))
      ->capture_default_str();
  r->add_option("--report", report_path, "JSON report path (default: stdout)");
  r->add_option("--csv", run_csv, "Per-step CSV path");
  r->add_flag("--snapshot", snapshot, "Attach final score tables to the report");

  RunFlags sweep;
  std::vector<SweepAxis> axes{{"a", {}}, {"epsilon", {}}, {"budget", {}}, {"r", {}}};
  std::string sweep_csv;
  auto* s = app.add_subcommand("sweep", "Aggregate rows over a grid of one or two parameters");
  sweep.attach(s);
  s->add_option("--grid-a", axes[0].values, "Values of a")->delimiter(',');
  s->add_option("--grid-epsilon", axes[1].values, "Values of epsilon")->delimiter(',');
  s->add_option("--grid-budget", axes[2].values, "Values of the budget fraction")->delimiter(',');
  s->add_option("--grid-r", axes[3].values, "Values of r")->delimiter(',');
  s->add_option("--csv", sweep_csv, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*r) return cmd_run(run, report_path, run_csv, snapshot);
    return cmd_sweep(sweep, axes, sweep_csv);
  } catch (const CliFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
