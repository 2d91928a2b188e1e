#pragma once

#include <cstddef>
#include <vector>

#include "lfps/config.hpp"
#include "lfps/numeric.hpp"
#include "lfps/score_tables.hpp"

namespace lfps {

using IndexSet = std::vector<Position>;  // sorted, unique

struct CandidateSet {
  IndexSet c0;  // thresholded
  IndexSet c1;  // expanded
  IndexSet c2;  // final Top-k
  std::size_t budget_k = 0;
};

// {p : ver(p) > tau_ver} U {p : sla(p) > tau_sla}; degenerate patterns add nothing.
IndexSet select_initial(const ScoreTablePair& tables, const ThresholdPair& thresholds);

// Offsets around every C0 member, kept when either score beats its table mean.
IndexSet expand(const IndexSet& c0, const ScoreTablePair& tables, const ThresholdPair& thresholds,
                const LfpsConfig& config);

// C1 plus the trailing local window of non-sink positions of an n-row store.
IndexSet finalize_probe_set(const IndexSet& c1, std::size_t n, const LfpsConfig& config);

IndexSet set_union(const IndexSet& a, const IndexSet& b);
bool is_subset(const IndexSet& sub, const IndexSet& super);
std::size_t intersection_size(const IndexSet& a, const IndexSet& b);

}  // namespace lfps
