#include "lfps/trace.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "lfps/error.hpp"

namespace lfps {

static_assert(std::endian::native == std::endian::little,
              "trace I/O assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace {

constexpr std::size_t kHeaderFields = 8;
constexpr std::size_t kHeaderBytes = 4 + 1 + kHeaderFields * 8;
constexpr std::size_t kTrailerBytes = 8;

// Multiplication that reports overflow instead of wrapping.
bool mul(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return false;
  out = a * b;
  return true;
}
bool add(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a) return false;
  out = a + b;
  return true;
}

// Total serialized size implied by a header, or false on overflow.
bool expected_size(const TraceHeader& h, std::uint64_t& total) {
  std::uint64_t heads, kv, w, per_head, step_payload, steps_total, tmp;
  if (!mul(h.layers, h.heads, heads)) return false;
  if (!mul(h.n_prefill, h.d, kv) || !mul(kv, 2, kv)) return false;
  if (!mul(h.prefill_window, h.weight_length(), w)) return false;
  // weight_scale + K + V + W + last query, in floats
  if (!add(1, kv, per_head) || !add(per_head, w, per_head) || !add(per_head, h.d, per_head)) {
    return false;
  }
  if (!mul(h.d, 3, step_payload) || !mul(step_payload, h.steps, steps_total)) return false;
  if (!add(per_head, steps_total, per_head) || !mul(per_head, heads, tmp) || !mul(tmp, 4, tmp)) {
    return false;
  }
  return add(tmp, kHeaderBytes + kTrailerBytes, total);
}

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void floats(const std::vector<float>& v) { raw(v.data(), v.size() * sizeof(float)); }
  void floats(const float* p, std::size_t n) { raw(p, n * sizeof(float)); }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void raw(void* dst, std::size_t n) {
    if (n > bytes_.size() - pos_) throw Error(Errc::truncated, "trace: unexpected end of data");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    raw(&v, sizeof v);
    return v;
  }
  void floats(std::vector<float>& out, std::size_t n) {
    out.resize(n);
    raw(out.data(), n * sizeof(float));
  }
  void floats(float* out, std::size_t n) { raw(out, n * sizeof(float)); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

void check_header(const TraceHeader& h) {
  if (h.value_encoding != kEncodingF32) {
    throw Error(Errc::structure, "trace: unknown value encoding " + std::to_string(h.value_encoding));
  }
  if (h.layers == 0 || h.heads == 0 || h.d == 0) {
    throw Error(Errc::structure, "trace: layers, heads and d must be non-zero");
  }
  if (h.n_prefill <= h.sink_count) {
    throw Error(Errc::structure, "trace: n_prefill must exceed sink_count");
  }
}

}  // namespace

void TraceFile::validate() const {
  check_header(header);
  const std::uint64_t d = header.d;
  if (heads.size() != header.head_count()) {
    throw Error(Errc::structure, "trace: head count does not match header");
  }
  for (const auto& h : heads) {
    if (h.keys.size() != header.n_prefill * d || h.values.size() != header.n_prefill * d ||
        h.weights.size() != header.prefill_window * header.weight_length() ||
        h.last_query.size() != d || h.queries.size() != header.steps * d ||
        h.new_keys.size() != header.steps * d || h.new_values.size() != header.steps * d) {
      throw Error(Errc::structure, "trace: payload size does not match header counts");
    }
  }
}

bool TraceFile::identical(const TraceFile& other) const {
  if (!(header == other.header) || heads.size() != other.heads.size()) return false;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto& a = heads[i];
    const auto& b = other.heads[i];
    if (std::bit_cast<std::uint32_t>(a.weight_scale) != std::bit_cast<std::uint32_t>(b.weight_scale) ||
        !same_bits(a.keys, b.keys) || !same_bits(a.values, b.values) ||
        !same_bits(a.weights, b.weights) || !same_bits(a.last_query, b.last_query) ||
        !same_bits(a.queries, b.queries) || !same_bits(a.new_keys, b.new_keys) ||
        !same_bits(a.new_values, b.new_values)) {
      return false;
    }
  }
  return true;
}

std::uint32_t trace_checksum(std::span<const std::uint8_t> payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < payload.size(); off += kChunk) {
    const std::size_t len = std::min(kChunk, payload.size() - off);
    crc = crc32(crc, payload.data() + off, static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> write_trace(const TraceFile& trace) {
  trace.validate();
  const TraceHeader& h = trace.header;
  std::uint64_t total = 0;
  if (!expected_size(h, total)) throw Error(Errc::structure, "trace: size overflow");
  Writer w(static_cast<std::size_t>(total));
  w.raw(kTraceMagic, 4);
  w.u8(kTraceVersion);
  for (std::uint64_t v : {h.layers, h.heads, h.d, h.n_prefill, h.steps, h.prefill_window,
                          h.sink_count, h.value_encoding}) {
    w.u64(v);
  }
  for (const auto& head : trace.heads) {
    w.f32(head.weight_scale);
    w.floats(head.keys);
    w.floats(head.values);
    w.floats(head.weights);
    w.floats(head.last_query);
  }
  const std::size_t d = h.d;
  for (std::size_t t = 0; t < h.steps; ++t) {
    for (const auto& head : trace.heads) {
      w.floats(head.queries.data() + t * d, d);
      w.floats(head.new_keys.data() + t * d, d);
      w.floats(head.new_values.data() + t * d, d);
    }
  }
  const std::uint64_t crc = trace_checksum(w.bytes());
  w.u64(crc);
  return std::move(w.bytes());
}

TraceFile read_trace(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(Errc::truncated, "trace: shorter than the magic bytes");
  if (std::memcmp(bytes.data(), kTraceMagic, 4) != 0) {
    throw Error(Errc::bad_magic, "trace: bad magic bytes");
  }
  if (bytes.size() < 5) throw Error(Errc::truncated, "trace: missing version byte");
  if (bytes[4] != kTraceVersion) {
    throw Error(Errc::bad_version, "trace: unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kHeaderBytes + kTrailerBytes) {
    throw Error(Errc::truncated, "trace: shorter than header and trailer");
  }

  Reader r(bytes);
  std::uint8_t skip[5];
  r.raw(skip, 5);
  TraceHeader h;
  h.layers = r.u64();
  h.heads = r.u64();
  h.d = r.u64();
  h.n_prefill = r.u64();
  h.steps = r.u64();
  h.prefill_window = r.u64();
  h.sink_count = r.u64();
  h.value_encoding = r.u64();
  check_header(h);

  std::uint64_t total = 0;
  if (!expected_size(h, total)) throw Error(Errc::structure, "trace: declared counts overflow");
  if (bytes.size() < total) {
    throw Error(Errc::truncated, "trace: " + std::to_string(bytes.size()) + " bytes, header declares " +
                                     std::to_string(total));
  }
  if (bytes.size() > total) {
    throw Error(Errc::structure, "trace: " + std::to_string(bytes.size() - total) +
                                     " trailing bytes beyond declared payload");
  }

  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + total - kTrailerBytes, kTrailerBytes);
  const std::uint32_t actual = trace_checksum(bytes.first(total - kTrailerBytes));
  if (stored != actual) throw Error(Errc::bad_checksum, "trace: checksum mismatch");

  TraceFile trace;
  trace.header = h;
  const std::size_t d = h.d;
  trace.heads.resize(h.head_count());
  for (auto& head : trace.heads) {
    head.weight_scale = r.f32();
    r.floats(head.keys, h.n_prefill * d);
    r.floats(head.values, h.n_prefill * d);
    r.floats(head.weights, h.prefill_window * h.weight_length());
    r.floats(head.last_query, d);
    head.queries.resize(h.steps * d);
    head.new_keys.resize(h.steps * d);
    head.new_values.resize(h.steps * d);
  }
  for (std::size_t t = 0; t < h.steps; ++t) {
    for (auto& head : trace.heads) {
      r.floats(head.queries.data() + t * d, d);
      r.floats(head.new_keys.data() + t * d, d);
      r.floats(head.new_values.data() + t * d, d);
    }
  }
  if (r.pos() != total - kTrailerBytes) throw Error(Errc::structure, "trace: payload size mismatch");
  return trace;
}

void write_trace_file(const TraceFile& trace, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = write_trace(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "failed writing " + path.string());
}

TraceFile read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw Error(Errc::io, "failed reading " + path.string());
  }
  return read_trace(bytes);
}

}  // namespace lfps
