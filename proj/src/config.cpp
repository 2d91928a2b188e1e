#include "lfps/config.hpp"

#include <algorithm>
#include <cmath>

#include "lfps/error.hpp"

namespace lfps {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::invalid_argument, what);
}
}  // namespace

void LfpsConfig::validate() const {
  require(d >= 1, "config: d must be >= 1");
  require(s >= 1, "config: s must be >= 1");
  require(std::isfinite(r) && r >= 0.0 && r < 1.0, "config: r must lie in [0, 1)");
  require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0,
          "config: epsilon must lie in [0, 1]");
  require(std::isfinite(a) && a > 0.0, "config: a must be > 0");
  require(sink_count >= 1, "config: sink_count must be >= 1");
  require(local_window >= 1, "config: local_window must be >= 1");
  require(std::find(expansion_offsets.begin(), expansion_offsets.end(), 0) !=
              expansion_offsets.end(),
          "config: expansion_offsets must contain 0");
}

}  // namespace lfps
