#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lfps/config.hpp"
#include "lfps/kv_store.hpp"
#include "lfps/score_tables.hpp"

namespace testing {

inline std::vector<double> gaussian(std::mt19937_64& rng, std::size_t count, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t count, double lo = 0.0,
                                   double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Store of n random rows.
inline lfps::KvStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                  double scale = 1.0) {
  lfps::KvStore store(d);
  store.reserve(n);
  for (std::size_t i = 0; i < n; ++i) store.append(gaussian(rng, d, scale), gaussian(rng, d));
  return store;
}

// Random nonnegative vector normalized to sum 1.
inline std::vector<double> simplex(std::mt19937_64& rng, std::size_t count) {
  auto v = uniform(rng, count, 0.01, 1.0);
  double sum = 0.0;
  for (double x : v) sum += x;
  for (auto& x : v) x /= sum;
  return v;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double norm_d = 0.0, norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    norm_d += (a[i] - b[i]) * (a[i] - b[i]);
    norm_b += b[i] * b[i];
  }
  return std::sqrt(norm_d) / std::max(std::sqrt(norm_b), 1e-300);
}

// Config for hand-sized cases.
inline lfps::LfpsConfig small_config(std::size_t d, std::size_t s, std::size_t sinks) {
  lfps::LfpsConfig c;
  c.d = d;
  c.s = s;
  c.sink_count = sinks;
  c.local_window = 2;
  return c;
}

}  // namespace testing
