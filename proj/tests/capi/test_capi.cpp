// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "lfps/lfps.h"

namespace {

lfps_synthetic_spec small_spec() {
  lfps_synthetic_spec s;
  lfps_synthetic_default(&s);
  s.heads = 2;
  s.n_prefill = 400;
  s.steps = 6;
  s.d = 8;
  s.prefill_window = 4;
  s.vertical_positions[0] = 30;
  s.vertical_count = 1;
  s.seed = 5;
  return s;
}

struct Trace {
  lfps_trace* t = nullptr;
  ~Trace() { lfps_trace_free(t); }
};

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(lfps_status_name(LFPS_OK)) == "ok");
  CHECK(std::string(lfps_status_name(LFPS_E_BAD_CHECKSUM)) == "checksum mismatch");
  CHECK(std::string(lfps_status_name(static_cast<lfps_status>(42))) == "unknown");
  CHECK(std::string(lfps_version()) == "1.0.0");
}

TEST_CASE("defaults mirror the reference operating point") {
  lfps_config c;
  lfps_config_default(&c);
  CHECK(c.s == 32);
  CHECK(c.r == 0.95);
  CHECK(c.epsilon == 0.85);
  CHECK(c.a == 0.2);
  CHECK(c.sink_count == 4);
  CHECK(c.offset_count == 4);
  lfps_run_options o;
  lfps_run_options_default(&o);
  CHECK(o.k_fraction == 0.02);
  CHECK(o.config.d == 0);
  CHECK(o.oracle == 1);
}

TEST_CASE("generate, serialize, read back") {
  lfps_synthetic_spec spec = small_spec();
  Trace a, b;
  REQUIRE(lfps_trace_generate(&spec, &a.t) == LFPS_OK);
  size_t size = 0;
  REQUIRE(lfps_trace_serialize(a.t, nullptr, 0, &size) == LFPS_OK);
  std::vector<uint8_t> buf(size);
  size_t written = 0;
  REQUIRE(lfps_trace_serialize(a.t, buf.data(), buf.size(), &written) == LFPS_OK);
  CHECK(written == size);
  REQUIRE(lfps_trace_read_memory(buf.data(), buf.size(), &b.t) == LFPS_OK);
  lfps_trace_info ia, ib;
  lfps_trace_info_get(a.t, &ia);
  lfps_trace_info_get(b.t, &ib);
  CHECK(ia.checksum == ib.checksum);
  CHECK(ia.byte_size == size);
  CHECK(ia.heads == 2);
  CHECK(ia.d == 8);

  buf[100] ^= 1;
  lfps_trace* bad = nullptr;
  CHECK(lfps_trace_read_memory(buf.data(), buf.size(), &bad) == LFPS_E_BAD_CHECKSUM);
  CHECK(bad == nullptr);
  CHECK(std::string(lfps_last_error()).find("checksum") != std::string::npos);

  spec.seed = 6;
  Trace c;
  REQUIRE(lfps_trace_generate(&spec, &c.t) == LFPS_OK);
  lfps_trace_info ic;
  lfps_trace_info_get(c.t, &ic);
  CHECK(ic.checksum != ia.checksum);
}

TEST_CASE("file roundtrip and missing file") {
  lfps_synthetic_spec spec = small_spec();
  Trace a, b;
  REQUIRE(lfps_trace_generate(&spec, &a.t) == LFPS_OK);
  const auto path = (std::filesystem::temp_directory_path() / "lfps_capi.lfps").string();
  REQUIRE(lfps_trace_write(a.t, path.c_str()) == LFPS_OK);
  REQUIRE(lfps_trace_read(path.c_str(), &b.t) == LFPS_OK);
  std::filesystem::remove(path);
  lfps_trace* missing = nullptr;
  CHECK(lfps_trace_read(path.c_str(), &missing) == LFPS_E_IO);
}

TEST_CASE("invalid arguments are reported, not crashed on") {
  lfps_synthetic_spec spec = small_spec();
  spec.vertical_positions[0] = 100000;
  lfps_trace* t = nullptr;
  CHECK(lfps_trace_generate(&spec, &t) == LFPS_E_INVALID_ARGUMENT);
  CHECK(lfps_trace_generate(nullptr, &t) == LFPS_E_INVALID_ARGUMENT);
  spec = small_spec();
  spec.vertical_count = LFPS_MAX_PATTERNS + 1;
  CHECK(lfps_trace_generate(&spec, &t) == LFPS_E_INVALID_ARGUMENT);
  lfps_trace_free(nullptr);
  lfps_session_free(nullptr);
  lfps_report_free(nullptr);
}

TEST_CASE("session steps through the C interface") {
  lfps_synthetic_spec spec = small_spec();
  Trace trace;
  REQUIRE(lfps_trace_generate(&spec, &trace.t) == LFPS_OK);
  lfps_config cfg;
  lfps_config_default(&cfg);
  cfg.d = 0;
  cfg.s = 0;
  cfg.sink_count = 0;
  cfg.epsilon = 1.0;
  lfps_session* s = nullptr;
  REQUIRE(lfps_session_create(trace.t, 0, &cfg, &s) == LFPS_OK);
  CHECK(lfps_session_size(s) == 400);

  std::vector<double> q(8, 0.5), k(8, 0.25), v(8, 1.0), out(8, 0.0);
  lfps_step_info info;
  REQUIRE(lfps_session_step(s, q.data(), k.data(), v.data(), 0.05, out.data(), &info) == LFPS_OK);
  CHECK(info.n == 400);
  CHECK(info.k == 20);
  CHECK(info.c2 == 20);
  CHECK(info.bypassed == 0);
  lfps_trace_info ti;
  lfps_trace_info_get(trace.t, &ti);
  // cfg.sink_count is 0, so the session adopted the trace's sink count.
  CHECK(info.dot_products == info.probe + cfg.local_window + ti.sink_count + 1);
  CHECK(lfps_session_size(s) == 401);

  const uint64_t hash = lfps_session_state_hash(s);
  CHECK(lfps_session_step(s, q.data(), k.data(), v.data(), -1.0, out.data(), &info) ==
        LFPS_E_INVALID_ARGUMENT);
  CHECK(lfps_session_state_hash(s) == hash);
  lfps_session_free(s);

  lfps_session* none = nullptr;
  CHECK(lfps_session_create(trace.t, 2, &cfg, &none) == LFPS_E_INVALID_ARGUMENT);
  cfg.d = 16;
  CHECK(lfps_session_create(trace.t, 0, &cfg, &none) == LFPS_E_DIMENSION_MISMATCH);
  cfg.d = 0;
  cfg.offset_count = LFPS_MAX_OFFSETS + 1;
  CHECK(lfps_session_create(trace.t, 0, &cfg, &none) == LFPS_E_INVALID_ARGUMENT);
}

TEST_CASE("run and report") {
  lfps_synthetic_spec spec = small_spec();
  Trace trace;
  REQUIRE(lfps_trace_generate(&spec, &trace.t) == LFPS_OK);
  lfps_run_options o;
  lfps_run_options_default(&o);
  o.k_fraction = 0.05;
  lfps_report* r = nullptr;
  REQUIRE(lfps_run(trace.t, &o, &r) == LFPS_OK);
  lfps_aggregates agg;
  REQUIRE(lfps_report_aggregates(r, &agg) == LFPS_OK);
  CHECK(agg.records == 12);
  CHECK(agg.oracle_calls == 36);
  const std::string json = lfps_report_json(r);
  CHECK(json.find("\"schema_version\": 1") < json.find("\"mode\""));
  const std::string csv = lfps_report_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  lfps_report_free(r);

  o.mode = 7;
  CHECK(lfps_run(trace.t, &o, &r) == LFPS_E_INVALID_ARGUMENT);
}
