#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lfps {

inline constexpr char kTraceMagic[4] = {'L', 'F', 'P', 'S'};
inline constexpr std::uint8_t kTraceVersion = 1;
inline constexpr std::uint64_t kEncodingF32 = 1;

struct TraceHeader {
  std::uint64_t layers = 1;
  std::uint64_t heads = 1;
  std::uint64_t d = 0;
  std::uint64_t n_prefill = 0;
  std::uint64_t steps = 0;
  std::uint64_t prefill_window = 0;  // s
  std::uint64_t sink_count = 0;
  std::uint64_t value_encoding = kEncodingF32;

  std::uint64_t head_count() const { return layers * heads; }
  std::uint64_t weight_length() const { return n_prefill - sink_count; }
  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

// Everything recorded for one (layer, head).
struct HeadTrace {
  float weight_scale = 1.0f;      // renormalization applied to the stored weights
  std::vector<float> keys;        // n_prefill x d
  std::vector<float> values;      // n_prefill x d
  std::vector<float> weights;     // s x (n_prefill - sink_count), oldest first
  std::vector<float> last_query;  // d
  std::vector<float> queries;     // steps x d
  std::vector<float> new_keys;    // steps x d
  std::vector<float> new_values;  // steps x d
};

struct TraceFile {
  TraceHeader header;
  std::vector<HeadTrace> heads;  // layer-major

  // Throws Error(structure) when payload sizes disagree with the header.
  void validate() const;
  // Bitwise equality, NaN payloads included.
  bool identical(const TraceFile& other) const;
};

std::vector<std::uint8_t> write_trace(const TraceFile& trace);
// Validates magic, version, counts and checksum before parsing payloads.
TraceFile read_trace(std::span<const std::uint8_t> bytes);

void write_trace_file(const TraceFile& trace, const std::filesystem::path& path);
TraceFile read_trace_file(const std::filesystem::path& path);

// CRC-32 (zlib polynomial) of `payload`. For a serialized trace the trailer
// holds this value computed over every byte before the trailer.
std::uint32_t trace_checksum(std::span<const std::uint8_t> payload);

}  // namespace lfps
