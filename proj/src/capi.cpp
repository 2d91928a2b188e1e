#include "lfps/lfps.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "lfps/engine.hpp"
#include "lfps/error.hpp"
#include "lfps/report.hpp"
#include "lfps/synthetic.hpp"
#include "lfps/trace.hpp"

struct lfps_trace {
  lfps::TraceFile file;
};

struct lfps_session {
  lfps::HeadSession session;
};

struct lfps_report {
  lfps::RunReport report;
  std::string json;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

lfps_status fail(lfps_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
lfps_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return LFPS_OK;
  } catch (const lfps::Error& e) {
    return fail(static_cast<lfps_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LFPS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LFPS_E_INTERNAL, e.what());
  }
}

lfps_status null_arg(const char* what) {
  return fail(LFPS_E_INVALID_ARGUMENT, std::string(what) + " must not be NULL");
}

lfps::LfpsConfig to_cpp(const lfps_config& c) {
  if (c.offset_count > LFPS_MAX_OFFSETS) {
    throw lfps::Error(lfps::Errc::invalid_argument, "too many expansion offsets");
  }
  if (c.bypass_mode != LFPS_BYPASS_MEAN_ONLY && c.bypass_mode != LFPS_BYPASS_SINK_AVERAGE) {
    throw lfps::Error(lfps::Errc::invalid_argument, "unknown bypass mode");
  }
  lfps::LfpsConfig out;
  out.d = c.d;
  out.s = c.s;
  out.r = c.r;
  out.epsilon = c.epsilon;
  out.a = c.a;
  out.expansion_offsets.assign(c.expansion_offsets, c.expansion_offsets + c.offset_count);
  out.sink_count = c.sink_count;
  out.local_window = c.local_window;
  out.bypass_mode = c.bypass_mode == LFPS_BYPASS_MEAN_ONLY ? lfps::BypassMode::mean_only
                                                           : lfps::BypassMode::sink_average;
  out.exhaustive_fallback = c.exhaustive_fallback != 0;
  return out;
}

void write_text(const char* path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw lfps::Error(lfps::Errc::io, std::string("cannot open ") + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw lfps::Error(lfps::Errc::io, std::string("write failed: ") + path);
}

}  // namespace

extern "C" {

const char* lfps_status_name(lfps_status status) {
  switch (status) {
    case LFPS_OK: return "ok";
    case LFPS_E_INTERNAL: return "internal";
    default:
      if (status >= LFPS_E_INVALID_ARGUMENT && status <= LFPS_E_STRUCTURE) {
        return lfps::errc_name(static_cast<lfps::Errc>(status));
      }
      return "unknown";
  }
}

const char* lfps_last_error(void) { return g_last_error.c_str(); }

const char* lfps_version(void) { return "1.0.0"; }

void lfps_config_default(lfps_config* config) {
  if (!config) return;
  const lfps::LfpsConfig d;
  std::memset(config, 0, sizeof *config);
  config->d = d.d;
  config->s = d.s;
  config->r = d.r;
  config->epsilon = d.epsilon;
  config->a = d.a;
  config->offset_count = d.expansion_offsets.size();
  std::copy(d.expansion_offsets.begin(), d.expansion_offsets.end(), config->expansion_offsets);
  config->sink_count = d.sink_count;
  config->local_window = d.local_window;
  config->bypass_mode = d.bypass_mode == lfps::BypassMode::mean_only ? LFPS_BYPASS_MEAN_ONLY
                                                                      : LFPS_BYPASS_SINK_AVERAGE;
  config->exhaustive_fallback = d.exhaustive_fallback ? 1 : 0;
}

void lfps_synthetic_default(lfps_synthetic_spec* spec) {
  if (!spec) return;
  const lfps::SyntheticSpec d;
  std::memset(spec, 0, sizeof *spec);
  spec->layers = d.layers;
  spec->heads = d.heads;
  spec->n_prefill = d.n_prefill;
  spec->steps = d.steps;
  spec->d = d.d;
  spec->prefill_window = d.prefill_window;
  spec->sink_count = d.sink_count;
  spec->slash_band = d.slash_band;
  spec->signal_gain = d.signal_gain;
  spec->slash_gain = d.slash_gain;
  spec->noise_scale = d.noise_scale;
  spec->query_coherence = d.query_coherence;
  spec->pattern_strength = d.pattern_strength;
  spec->cluster_width = d.cluster_width;
  spec->sink_gain = d.sink_gain;
  spec->seed = d.seed;
}

lfps_status lfps_trace_generate(const lfps_synthetic_spec* spec, lfps_trace** out) {
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    if (spec->vertical_count > LFPS_MAX_PATTERNS || spec->slash_count > LFPS_MAX_PATTERNS) {
      throw lfps::Error(lfps::Errc::invalid_argument, "too many planted patterns");
    }
    lfps::SyntheticSpec s;
    s.layers = spec->layers;
    s.heads = spec->heads;
    s.n_prefill = spec->n_prefill;
    s.steps = spec->steps;
    s.d = spec->d;
    s.prefill_window = spec->prefill_window;
    s.sink_count = spec->sink_count;
    s.vertical_positions.assign(spec->vertical_positions,
                                spec->vertical_positions + spec->vertical_count);
    s.slash_offsets.assign(spec->slash_offsets, spec->slash_offsets + spec->slash_count);
    s.slash_band = spec->slash_band;
    s.signal_gain = spec->signal_gain;
    s.slash_gain = spec->slash_gain;
    s.noise_scale = spec->noise_scale;
    s.query_coherence = spec->query_coherence;
    s.pattern_strength = spec->pattern_strength;
    s.cluster_width = spec->cluster_width;
    s.sink_gain = spec->sink_gain;
    s.seed = spec->seed;
    *out = new lfps_trace{lfps::gen_synthetic(s)};
  });
}

lfps_status lfps_trace_read(const char* path, lfps_trace** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new lfps_trace{lfps::read_trace_file(path)}; });
}

lfps_status lfps_trace_read_memory(const uint8_t* bytes, size_t size, lfps_trace** out) {
  if (!bytes && size) return null_arg("bytes");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new lfps_trace{lfps::read_trace({bytes, size})}; });
}

lfps_status lfps_trace_write(const lfps_trace* trace, const char* path) {
  if (!trace) return null_arg("trace");
  if (!path) return null_arg("path");
  return guarded([&] { lfps::write_trace_file(trace->file, path); });
}

lfps_status lfps_trace_serialize(const lfps_trace* trace, uint8_t* buf, size_t capacity,
                                 size_t* size) {
  if (!trace) return null_arg("trace");
  if (!size) return null_arg("size");
  return guarded([&] {
    const std::vector<std::uint8_t> bytes = lfps::write_trace(trace->file);
    *size = bytes.size();
    if (!buf) return;
    if (capacity < bytes.size()) {
      throw lfps::Error(lfps::Errc::invalid_argument, "buffer too small for serialized trace");
    }
    std::memcpy(buf, bytes.data(), bytes.size());
  });
}

lfps_status lfps_trace_info_get(const lfps_trace* trace, lfps_trace_info* info) {
  if (!trace) return null_arg("trace");
  if (!info) return null_arg("info");
  return guarded([&] {
    const lfps::TraceHeader& h = trace->file.header;
    const std::vector<std::uint8_t> bytes = lfps::write_trace(trace->file);
    info->layers = h.layers;
    info->heads = h.heads;
    info->d = h.d;
    info->n_prefill = h.n_prefill;
    info->steps = h.steps;
    info->prefill_window = h.prefill_window;
    info->sink_count = h.sink_count;
    info->value_encoding = h.value_encoding;
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - sizeof stored, sizeof stored);
    info->checksum = static_cast<std::uint32_t>(stored);
    info->byte_size = bytes.size();
  });
}

void lfps_trace_free(lfps_trace* trace) { delete trace; }

lfps_status lfps_session_create(const lfps_trace* trace, size_t head_index,
                                const lfps_config* config, lfps_session** out) {
  if (!trace) return null_arg("trace");
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const lfps::LfpsConfig cfg = lfps::resolve_config(trace->file.header, to_cpp(*config));
    *out = new lfps_session{lfps::bootstrap_head(trace->file, head_index, cfg)};
  });
}

lfps_status lfps_session_step(lfps_session* session, const double* q, const double* key,
                              const double* value, double k_fraction, double* output,
                              lfps_step_info* info) {
  if (!session) return null_arg("session");
  if (!q || !key || !value) return null_arg("q, key and value");
  return guarded([&] {
    const std::size_t d = session->session.store().dim();
    const lfps::StepResult r =
        session->session.decode_step({q, d}, {key, d}, {value, d}, k_fraction);
    if (output) std::copy(r.output.begin(), r.output.end(), output);
    if (info) {
      info->n = r.n;
      info->k = r.candidates.budget_k;
      info->c0 = r.candidates.c0.size();
      info->c1 = r.candidates.c1.size();
      info->c2 = r.candidates.c2.size();
      info->probe = r.probe_size;
      info->dot_products = r.gate_dots + r.probe_dots;
      info->clamps = r.clamps;
      info->bypassed = r.bypassed ? 1 : 0;
      info->rho = r.rho;
    }
  });
}

uint64_t lfps_session_state_hash(const lfps_session* session) {
  return session ? session->session.state_hash() : 0;
}

size_t lfps_session_size(const lfps_session* session) {
  return session ? session->session.store().size() : 0;
}

void lfps_session_free(lfps_session* session) { delete session; }

void lfps_run_options_default(lfps_run_options* options) {
  if (!options) return;
  std::memset(options, 0, sizeof *options);
  const lfps::RunOptions d;
  options->mode = LFPS_MODE_LFPS;
  options->k_fraction = d.k_fraction;
  lfps_config_default(&options->config);
  options->config.d = 0;
  options->config.s = 0;
  options->config.sink_count = 0;
  options->oracle = d.oracle ? 1 : 0;
  options->threads = d.threads;
  options->snapshot = 0;
}

lfps_status lfps_run(const lfps_trace* trace, const lfps_run_options* options,
                     lfps_report** out) {
  if (!trace) return null_arg("trace");
  if (!options) return null_arg("options");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    lfps::RunOptions o;
    switch (options->mode) {
      case LFPS_MODE_LFPS: o.mode = lfps::RunMode::lfps; break;
      case LFPS_MODE_TOPK_ORACLE: o.mode = lfps::RunMode::topk_oracle; break;
      case LFPS_MODE_FULL: o.mode = lfps::RunMode::full; break;
      default: throw lfps::Error(lfps::Errc::invalid_argument, "unknown run mode");
    }
    o.k_fraction = options->k_fraction;
    o.config = to_cpp(options->config);
    o.oracle = options->oracle != 0;
    o.threads = options->threads ? options->threads : 1;
    o.snapshot = options->snapshot != 0;
    auto* report = new lfps_report{lfps::run_trace(trace->file, o), {}, {}};
    try {
      report->json = lfps::emit_json(report->report);
      report->csv = lfps::emit_csv(report->report);
    } catch (...) {
      delete report;
      throw;
    }
    *out = report;
  });
}

lfps_status lfps_report_aggregates(const lfps_report* report, lfps_aggregates* out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  const lfps::Aggregates& a = report->report.aggregates;
  out->records = a.records;
  out->mean_eta = a.mean_eta;
  out->median_eta = a.median_eta;
  out->mean_candidate_fraction = a.mean_candidate_fraction;
  out->bypass_rate = a.bypass_rate;
  out->mean_output_error = a.mean_output_error;
  out->steps_per_sec_per_head = a.steps_per_sec_per_head;
  out->tokens_per_sec = a.tokens_per_sec;
  out->reference_steps_per_sec_per_head = a.reference_steps_per_sec_per_head;
  out->reference_tokens_per_sec = a.reference_tokens_per_sec;
  out->oracle_calls = a.oracle_calls;
  out->table_clamps = a.table_clamps;
  out->c0_not_in_c1 = a.c0_not_in_c1;
  g_last_error.clear();
  return LFPS_OK;
}

const char* lfps_report_json(const lfps_report* report) {
  return report ? report->json.c_str() : "";
}

const char* lfps_report_csv(const lfps_report* report) {
  return report ? report->csv.c_str() : "";
}

lfps_status lfps_report_write_json(const lfps_report* report, const char* path) {
  if (!report) return null_arg("report");
  if (!path) return null_arg("path");
  return guarded([&] { write_text(path, report->json); });
}

lfps_status lfps_report_write_csv(const lfps_report* report, const char* path) {
  if (!report) return null_arg("report");
  if (!path) return null_arg("path");
  return guarded([&] { write_text(path, report->csv); });
}

void lfps_report_free(lfps_report* report) { delete report; }

}  // extern "C"
