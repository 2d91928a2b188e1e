#include "lfps/error.hpp"

namespace lfps {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::numeric: return "numeric error";
    case Errc::invalid_state: return "invalid state";
    case Errc::io: return "i/o error";
    case Errc::bad_magic: return "bad magic";
    case Errc::bad_version: return "unsupported version";
    case Errc::bad_checksum: return "checksum mismatch";
    case Errc::truncated: return "truncated input";
    case Errc::structure: return "malformed structure";
  }
  return "unknown error";
}

}  // namespace lfps
