#pragma once

#include <stdexcept>
#include <string>

namespace lfps {

enum class Errc {
  invalid_argument = 1,
  dimension_mismatch,
  numeric,
  invalid_state,
  io,
  bad_magic,
  bad_version,
  bad_checksum,
  truncated,
  structure,
};

const char* errc_name(Errc code) noexcept;

// All library failures are reported with this exception type; the C API maps
// `code()` onto lfps_status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lfps
