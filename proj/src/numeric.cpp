#include "lfps/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "lfps/error.hpp"
#include "simd.hpp"

namespace lfps {

IndexedValues softmax_restricted(const IndexedValues& logits) {
  if (logits.empty()) throw Error(Errc::invalid_argument, "softmax over an empty set");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& e : logits) {
    if (!std::isfinite(e.value)) throw Error(Errc::numeric, "softmax: non-finite score");
    max_logit = std::max(max_logit, e.value);
  }
  IndexedValues out;
  out.reserve(logits.size());
  double total = 0.0;
  for (const auto& e : logits) {
    double w = std::exp(e.value - max_logit);
    total += w;
    out.push_back({e.index, w});
  }
  for (auto& e : out) e.value /= total;
  return out;
}

Moments moments(std::span<const double> x) { return moments(x, {}); }

namespace {

// Eight accumulator lanes held in two 4-wide vectors: lane j accumulates
// elements i + j. Keeping the lanes explicit fixes the summation order (so
// results are reproducible) while letting the compiler use SIMD registers.
using Lanes = double __attribute__((vector_size(4 * sizeof(double))));
constexpr std::size_t kAcc = 8;

LFPS_ALWAYS_INLINE Lanes load(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

LFPS_ALWAYS_INLINE double total(Lanes lo, Lanes hi) {
  return ((lo[0] + hi[0]) + (lo[2] + hi[2])) + ((lo[1] + hi[1]) + (lo[3] + hi[3]));
}

struct Sums {
  Lanes lo{}, hi{};
  double tail = 0.0;
  LFPS_ALWAYS_INLINE double value() const { return total(lo, hi) + tail; }
};

LFPS_ALWAYS_INLINE void sum_into(std::span<const double> x, Sums& acc) {
  const double* p = x.data();
  Lanes lo = acc.lo, hi = acc.hi;
  std::size_t i = 0;
  for (; i + kAcc <= x.size(); i += kAcc) {
    lo += load(p + i);
    hi += load(p + i + 4);
  }
  acc.lo = lo;
  acc.hi = hi;
  for (; i < x.size(); ++i) acc.tail += p[i];
}

LFPS_ALWAYS_INLINE void centered_into(std::span<const double> x, double mean, Sums& acc2, Sums& acc4) {
  const double* p = x.data();
  const Lanes mu = Lanes{} + mean;
  Lanes s2lo = acc2.lo, s2hi = acc2.hi, s4lo = acc4.lo, s4hi = acc4.hi;
  std::size_t i = 0;
  for (; i + kAcc <= x.size(); i += kAcc) {
    const Lanes clo = load(p + i) - mu;
    const Lanes chi = load(p + i + 4) - mu;
    const Lanes qlo = clo * clo;
    const Lanes qhi = chi * chi;
    s2lo += qlo;
    s2hi += qhi;
    s4lo += qlo * qlo;
    s4hi += qhi * qhi;
  }
  acc2.lo = s2lo;
  acc2.hi = s2hi;
  acc4.lo = s4lo;
  acc4.hi = s4hi;
  for (; i < x.size(); ++i) {
    const double c = p[i] - mean;
    acc2.tail += c * c;
    acc4.tail += c * c * c * c;
  }
}

}  // namespace

LFPS_MULTIVERSION
Moments moments(std::span<const double> head, std::span<const double> tail) {
  const std::size_t n = head.size() + tail.size();
  Moments m;
  if (n == 0) throw Error(Errc::invalid_argument, "moments of an empty vector");
  Sums sum;
  sum_into(head, sum);
  sum_into(tail, sum);
  m.mean = sum.value() / static_cast<double>(n);
  Sums s2, s4;
  centered_into(head, m.mean, s2, s4);
  centered_into(tail, m.mean, s2, s4);
  m.centered_sum2 = s2.value();
  m.centered_sum4 = s4.value();
  return m;
}

double dot_reference(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

namespace {

thread_local std::uint64_t t_dot_calls = 0;

LFPS_MULTIVERSION
double dot_kernel(const double* pa, const double* pb, std::size_t n) {
  Lanes lo{}, hi{};
  std::size_t i = 0;
  for (; i + kAcc <= n; i += kAcc) {
    lo += load(pa + i) * load(pb + i);
    hi += load(pa + i + 4) * load(pb + i + 4);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += pa[i] * pb[i];
  return total(lo, hi) + tail;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  ++t_dot_calls;
  return dot_kernel(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) { return dot_kernel(a.data(), a.data(), a.size()); }

std::uint64_t dot_call_count() noexcept { return t_dot_calls; }

}  // namespace lfps
