#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lfps {

using Position = std::size_t;

// A score or weight attached to a KV position. Collections of these are kept
// sorted by position.
struct IndexedValue {
  Position index;
  double value;
  friend bool operator==(const IndexedValue&, const IndexedValue&) = default;
};
using IndexedValues = std::vector<IndexedValue>;

// Softmax over the given entries with max subtraction. Output keeps the input
// order. Throws on empty input or non-finite scores.
IndexedValues softmax_restricted(const IndexedValues& logits);

struct Moments {
  double mean = 0.0;
  double centered_sum2 = 0.0;
  double centered_sum4 = 0.0;
};

// Two-pass mean and centered power sums. Throws on empty input.
Moments moments(std::span<const double> x);
// Same, over the concatenation of two spans (used for ring-buffered tables).
Moments moments(std::span<const double> head, std::span<const double> tail);

// Sequential left-to-right accumulation; the reference every kernel is tested
// against.
double dot_reference(std::span<const double> a, std::span<const double> b);

// Fixed-order blocked accumulation (8 lanes, lanes summed pairwise at the
// end). Deterministic for a given length; agrees with dot_reference to ~1e-12
// relative on well-conditioned input.
double dot(std::span<const double> a, std::span<const double> b);

// Same kernel as dot() but not counted.
double squared_norm(std::span<const double> a);

// Number of dot() calls made so far on the calling thread. Used to verify
// per-step work bounds.
std::uint64_t dot_call_count() noexcept;

}  // namespace lfps
