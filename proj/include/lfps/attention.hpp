#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lfps/candidates.hpp"
#include "lfps/kv_store.hpp"
#include "lfps/numeric.hpp"

namespace lfps {

struct AttentionOutput {
  std::vector<double> output;
  IndexedValues weights;  // ascending position
};

struct OverlapReport {
  double eta = 0.0;
  std::size_t k = 0;
  std::size_t intersection = 0;
};

// q . K_p / sqrt(d)
double scaled_logit(std::span<const double> q, const KvStore& store, Position p);

// The min(k, |probe|) probe positions with the largest logits (lower position
// wins ties), returned with their logits in ascending position order. One dot
// product per probe position; a bounded heap when k is small against the
// probe set, a linear-time selection otherwise.
IndexedValues exact_topk_restricted(std::span<const double> q, const KvStore& store,
                                    const IndexSet& probe, std::size_t k);

// Joint softmax over the selected logits and the sink logits; value rows are
// accumulated in ascending position order.
AttentionOutput attention_output(const KvStore& store, const IndexedValues& selected_logits,
                                 const IndexedValues& sink_logits);
AttentionOutput attention_output(std::span<const double> q, const KvStore& store,
                                 const IndexSet& c2, std::size_t sink_count);

// Reference implementations. Clarity over speed.
AttentionOutput full_attention_oracle(std::span<const double> q, const KvStore& store);
IndexSet topk_oracle(std::span<const double> q, const KvStore& store, std::size_t k,
                     std::size_t sink_count);

OverlapReport overlap_ratio(const IndexSet& c, const IndexSet& exact, std::size_t k);

// |approx - exact| / max(|exact|, 1e-12)
double output_error(std::span<const double> approx, std::span<const double> exact);

}  // namespace lfps
