#include "lfps/score_tables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "lfps/error.hpp"
#include "simd.hpp"

namespace lfps {

namespace {
// Lazy decay keeps scale_ = r^t and stores values divided by it. Fold the scale
// back in while stored values are small enough for fourth powers to stay finite.
constexpr double kMinScale = 1e-60;
constexpr double kDegenerateSum2 = 1e-12;
constexpr double kWeightSumTolerance = 1e-6;

// Appends base + i for every v[i] > limit. Selections are sparse, so each
// block of 64 is first reduced to a bit mask and only set bits are visited.
LFPS_MULTIVERSION
void scan_above(const double* v, std::size_t count, double limit, Position base,
                std::vector<Position>& out) {
  constexpr std::size_t kBlock = 64;
  std::size_t start = 0;
  for (; start + kBlock <= count; start += kBlock) {
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
      mask |= static_cast<std::uint64_t>(v[start + i] > limit) << i;
    }
    while (mask) {
      out.push_back(base + start + static_cast<std::size_t>(std::countr_zero(mask)));
      mask &= mask - 1;
    }
  }
  for (; start < count; ++start) {
    if (v[start] > limit) out.push_back(base + start);
  }
}
}  // namespace

ScoreTablePair ScoreTablePair::init(std::span<const std::vector<double>> prefill_weights,
                                    const LfpsConfig& config) {
  config.validate();
  const std::size_t s = config.s;
  if (prefill_weights.size() < s) {
    throw Error(Errc::invalid_argument, "init_tables: expected " + std::to_string(s) +
                                            " prefill weight vectors, got " +
                                            std::to_string(prefill_weights.size()));
  }
  // Only the most recent s vectors participate.
  prefill_weights = prefill_weights.subspan(prefill_weights.size() - s);
  const std::size_t m = prefill_weights.front().size();
  for (const auto& w : prefill_weights) {
    if (w.size() != m) throw Error(Errc::dimension_mismatch, "init_tables: weight length mismatch");
  }

  ScoreTablePair t;
  t.sink_count_ = config.sink_count;
  t.r_ = config.r;
  t.ensure_capacity(m + 2);
  t.m_ = m;

  const double norm = 1.0 / (2.0 * static_cast<double>(s) * (1.0 - config.r));
  // j = 1 is the most recent prefill step; slash entries of step n-j are read
  // j-1 positions back, with out-of-range terms zero.
  for (std::size_t j = 1; j <= s; ++j) {
    const auto& w = prefill_weights[s - j];
    for (std::size_t i = 0; i < m; ++i) t.ver_[i] += w[i];
    for (std::size_t i = j - 1; i < m; ++i) t.sla_[t.sla_slot(i)] += w[i - (j - 1)];
  }
  for (std::size_t i = 0; i < m; ++i) {
    t.ver_[i] *= norm;
    t.sla_[t.sla_slot(i)] *= norm;
  }
  return t;
}

void ScoreTablePair::ensure_capacity(std::size_t needed) {
  if (needed <= cap_) return;
  std::size_t cap = std::max<std::size_t>(needed, cap_ + cap_ / 2);
  std::vector<double> ver(cap, 0.0);
  std::vector<double> sla(cap, 0.0);
  std::copy_n(ver_.begin(), std::min(cap_, ver_.size()), ver.begin());
  // Keep the carried slot (logical m_) when an update is pending.
  const std::size_t live = pending_ ? m_ + 1 : m_;
  for (std::size_t i = 0; i < live; ++i) sla[i] = sla_[sla_slot(i)];
  ver_.swap(ver);
  sla_.swap(sla);
  sla_base_ = 0;
  cap_ = cap;
}

void ScoreTablePair::renormalize() {
  for (std::size_t i = 0; i < cap_; ++i) {
    ver_[i] *= scale_;
    sla_[i] *= scale_;
  }
  scale_ = 1.0;
}

std::vector<double> ScoreTablePair::ver_values() const {
  std::vector<double> out(m_);
  for (std::size_t i = 0; i < m_; ++i) out[i] = ver_[i] * scale_;
  return out;
}

std::vector<double> ScoreTablePair::sla_values() const {
  std::vector<double> out(m_);
  for (std::size_t i = 0; i < m_; ++i) out[i] = sla_[sla_slot(i)] * scale_;
  return out;
}

double ScoreTablePair::ver_sum() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < m_; ++i) sum += ver_[i];
  return sum * scale_;
}

double ScoreTablePair::sla_sum() const {
  double sum = 0.0;
  const std::size_t live = pending_ ? m_ + 1 : m_;
  for (std::size_t i = 0; i < live; ++i) sum += sla_[sla_slot(i)];
  return sum * scale_;
}

void ScoreTablePair::update(const IndexedValues& weights) {
  if (pending_) {
    throw Error(Errc::invalid_state, "update_tables: previous update was not followed by grow");
  }
  if (weights.empty()) throw Error(Errc::invalid_argument, "update_tables: empty C2");
  double total = 0.0;
  for (const auto& w : weights) {
    if (w.index < sink_count_ || w.index >= end_position()) {
      throw Error(Errc::invalid_argument,
                  "update_tables: position " + std::to_string(w.index) + " outside tables");
    }
    if (!std::isfinite(w.value)) throw Error(Errc::numeric, "update_tables: non-finite weight");
    total += w.value;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw Error(Errc::invalid_argument,
                "update_tables: weights over C2 sum to " + std::to_string(total));
  }

  scale_ *= r_;
  if (scale_ == 0.0) {
    // r == 0: everything decays away.
    std::fill(ver_.begin(), ver_.end(), 0.0);
    std::fill(sla_.begin(), sla_.end(), 0.0);
    scale_ = 1.0;
  }
  // Slash shift: logical i now reads what logical i-1 held. The slot that
  // becomes logical 0 lies past the carried slot and is zero.
  sla_base_ = sla_base_ == 0 ? cap_ - 1 : sla_base_ - 1;
  sla_[sla_slot(0)] = 0.0;

  const double half_mean = 1.0 / (2.0 * static_cast<double>(weights.size()));
  const double inv_scale = 1.0 / scale_;
  for (const auto& w : weights) {
    const double delta = (w.value - half_mean) * inv_scale;
    const std::size_t i = w.index - sink_count_;
    double& v = ver_[i];
    v += delta;
    if (v < 0.0) {
      v = 0.0;
      ++clamps_;
    }
    double& s = sla_[sla_slot(i)];
    s += delta;
    if (s < 0.0) {
      s = 0.0;
      ++clamps_;
    }
  }
  pending_ = true;
  if (scale_ < kMinScale) renormalize();
}

void ScoreTablePair::grow() {
  ensure_capacity(m_ + 3);
  if (!pending_) sla_[sla_slot(m_)] = 0.0;
  ver_[m_] = 0.0;
  ++m_;
  pending_ = false;
}

ThresholdPair ScoreTablePair::thresholds(const LfpsConfig& config) const {
  ThresholdPair t;
  if (config.exhaustive_fallback) {
    const double ninf = -std::numeric_limits<double>::infinity();
    t.tau_ver = t.tau_sla = t.mean_ver = t.mean_sla = ninf;
    return t;
  }
  if (m_ < 2) {
    t.ver_degenerate = t.sla_degenerate = true;
    return t;
  }
  auto derive = [&](const Moments& mo, double& tau, double& mean, double& kappa,
                    bool& degenerate) {
    const double s2 = mo.centered_sum2 * scale_ * scale_;
    mean = mo.mean * scale_;
    if (!(s2 >= kDegenerateSum2)) {
      degenerate = true;
      tau = std::numeric_limits<double>::infinity();
      return;
    }
    // Kurtosis without the 1/n factor; it is invariant to the lazy scale.
    kappa = mo.centered_sum4 / (mo.centered_sum2 * mo.centered_sum2);
    tau = config.a * mean / kappa;
  };

  Moments mv = moments(std::span<const double>(ver_.data(), m_));
  const std::size_t first = std::min(m_, cap_ - sla_base_);
  Moments ms = moments(std::span<const double>(sla_.data() + sla_base_, first),
                       std::span<const double>(sla_.data(), m_ - first));
  derive(mv, t.tau_ver, t.mean_ver, t.kappa_ver, t.ver_degenerate);
  derive(ms, t.tau_sla, t.mean_sla, t.kappa_sla, t.sla_degenerate);
  return t;
}

void ScoreTablePair::ver_above(double threshold, std::vector<Position>& out) const {
  out.clear();
  if (std::isnan(threshold)) return;
  scan_above(ver_.data(), m_, threshold / scale_, sink_count_, out);
}

void ScoreTablePair::sla_above(double threshold, std::vector<Position>& out) const {
  out.clear();
  if (std::isnan(threshold)) return;
  const double limit = threshold / scale_;
  const std::size_t first = std::min(m_, cap_ - sla_base_);
  scan_above(sla_.data() + sla_base_, first, limit, sink_count_, out);
  scan_above(sla_.data(), m_ - first, limit, sink_count_ + first, out);
}

bool ScoreTablePair::same_contents(const ScoreTablePair& other) const {
  if (m_ != other.m_ || sink_count_ != other.sink_count_ || pending_ != other.pending_) {
    return false;
  }
  auto a = ver_values(), b = other.ver_values();
  auto c = sla_values(), d = other.sla_values();
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0 &&
         std::memcmp(c.data(), d.data(), c.size() * sizeof(double)) == 0;
}

}  // namespace lfps
