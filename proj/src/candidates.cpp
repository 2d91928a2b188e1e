#include "lfps/candidates.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <iterator>

namespace lfps {

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_subset(const IndexSet& sub, const IndexSet& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

std::size_t intersection_size(const IndexSet& a, const IndexSet& b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

IndexSet select_initial(const ScoreTablePair& tables, const ThresholdPair& thresholds) {
  IndexSet ver, sla;
  if (!thresholds.ver_degenerate) tables.ver_above(thresholds.tau_ver, ver);
  if (!thresholds.sla_degenerate) tables.sla_above(thresholds.tau_sla, sla);
  if (sla.empty()) return ver;
  if (ver.empty()) return sla;
  return set_union(ver, sla);
}

IndexSet expand(const IndexSet& c0, const ScoreTablePair& tables, const ThresholdPair& thresholds,
                const LfpsConfig& config) {
  IndexSet out;
  if (c0.empty()) return out;
  const auto lo = static_cast<std::int64_t>(tables.first_position());
  const auto hi = static_cast<std::int64_t>(tables.end_position());
  // Mark every shifted position in a byte map over the table range, then read
  // the marks back in order. The threshold scan is already linear in the
  // table size, and this avoids sorting |C0| x |offsets| positions.
  std::vector<std::uint8_t> marked(static_cast<std::size_t>(hi - lo), 0);
  for (Position i : c0) {
    for (std::int64_t delta : config.expansion_offsets) {
      const std::int64_t j = static_cast<std::int64_t>(i) + delta;
      if (j >= lo && j < hi) marked[static_cast<std::size_t>(j - lo)] = 1;
    }
  }
  out.reserve(c0.size() * config.expansion_offsets.size());
  auto keep = [&](std::size_t k) {
    const Position p = static_cast<Position>(lo) + k;
    const bool ver_ok = !thresholds.ver_degenerate && tables.ver(p) > thresholds.mean_ver;
    const bool sla_ok = !thresholds.sla_degenerate && tables.sla(p) > thresholds.mean_sla;
    if (ver_ok || sla_ok) out.push_back(p);
  };
  // Marks are sparse; skip unmarked stretches eight bytes at a time.
  std::size_t k = 0;
  for (; k + 8 <= marked.size(); k += 8) {
    std::uint64_t word;
    std::memcpy(&word, marked.data() + k, sizeof word);
    if (word == 0) continue;
    for (std::size_t b = 0; b < 8; ++b) {
      if (marked[k + b]) keep(k + b);
    }
  }
  for (; k < marked.size(); ++k) {
    if (marked[k]) keep(k);
  }
  return out;
}

IndexSet finalize_probe_set(const IndexSet& c1, std::size_t n, const LfpsConfig& config) {
  if (n <= config.sink_count) return c1;
  const std::size_t first = std::max(config.sink_count, n > config.local_window ? n - config.local_window : 0);
  IndexSet local;
  local.reserve(n - first);
  for (std::size_t p = first; p < n; ++p) local.push_back(p);
  return set_union(c1, local);
}

}  // namespace lfps
