#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "lfps/error.hpp"
#include "lfps/numeric.hpp"
#include "lfps/sparsity_gate.hpp"

using namespace lfps;

namespace {
// Softmax mass of the first `sinks` positions over the whole store.
double full_sink_share(const std::vector<double>& q, const KvStore& store, std::size_t sinks) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(store.dim()));
  std::vector<double> logits;
  for (std::size_t i = 0; i < store.size(); ++i) {
    logits.push_back(dot_reference(q, store.key(i)) * scale);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double w = std::exp(logits[i] - top);
    den += w;
    if (i < sinks) num += w;
  }
  return num / den;
}
}  // namespace

TEST_SUITE("sparsity_gate") {
  TEST_CASE("identical non-sink keys give zero logit variance") {
    KvStore store(3);
    store.append(std::vector<double>{5, 5, 5}, std::vector<double>{0, 0, 0});
    for (int i = 0; i < 20; ++i) {
      store.append(std::vector<double>{1, -2, 0.5}, std::vector<double>{1, 1, 1});
    }
    LfpsConfig c = testing::small_config(3, 1, 1);
    HeadStats st = compute_head_stats(store, std::vector<double>{0.3, 0.7, -1.1}, c);
    CHECK(st.sigma_hat_sq == 0.0);
  }

  TEST_CASE("mean key of two unit rows") {
    KvStore store(2);
    store.append(std::vector<double>{9, 9}, std::vector<double>{9, 9});  // sink
    store.append(std::vector<double>{1, 0}, std::vector<double>{2, 0});
    store.append(std::vector<double>{0, 1}, std::vector<double>{0, 4});
    HeadStats st = compute_head_stats(store, std::vector<double>{1, 1}, testing::small_config(2, 1, 1));
    CHECK(st.mean_key == std::vector<double>{0.5, 0.5});
    CHECK(st.mean_value == std::vector<double>{1.0, 2.0});
    CHECK(st.sink_keys == std::vector<double>{9, 9});
  }

  TEST_CASE("logit variance matches a two-pass oracle on a 256 x 64 store") {
    std::mt19937_64 rng(21);
    KvStore store = testing::random_store(rng, 256, 64);
    auto q = testing::gaussian(rng, 64);
    LfpsConfig c = testing::small_config(64, 1, 4);
    HeadStats st = compute_head_stats(store, q, c);

    std::vector<double> logits;
    for (std::size_t i = 4; i < 256; ++i) logits.push_back(dot_reference(q, store.key(i)) / 8.0);
    double mean = 0.0;
    for (double l : logits) mean += l;
    mean /= static_cast<double>(logits.size());
    double var = 0.0;
    for (double l : logits) var += (l - mean) * (l - mean);
    var /= static_cast<double>(logits.size());
    CHECK(testing::rel_diff(st.sigma_hat_sq, var / dot_reference(q, q)) < 1e-9);
  }

  TEST_CASE("zero logits over 100 non-sink positions give a global mass of 100") {
    KvStore store(2);
    store.append(std::vector<double>{0, 1}, std::vector<double>{0, 0});  // sink
    for (int i = 0; i < 100; ++i) store.append(std::vector<double>{0, 1}, std::vector<double>{1, 0});
    std::vector<double> q{1, 0};
    LfpsConfig c = testing::small_config(2, 1, 1);
    HeadStats st = compute_head_stats(store, q, c);
    SparsityEstimate e = estimate_sparsity(q, store, st, c);
    CHECK(e.w_global * std::exp(e.log_shift) == doctest::Approx(100.0).epsilon(1e-13));
    CHECK(e.w_sink * std::exp(e.log_shift) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(e.w_local * std::exp(e.log_shift) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(e.rho == doctest::Approx(1.0 / 103.0).epsilon(1e-13));
  }

  TEST_CASE("ratio arithmetic") {
    CHECK(sparsity_ratio(17.0, 2.0, 1.0) == doctest::Approx(0.85).epsilon(1e-15));
    // Monotone in each component.
    CHECK(sparsity_ratio(17.0, 2.5, 1.0) < sparsity_ratio(17.0, 2.0, 1.0));
    CHECK(sparsity_ratio(17.0, 2.0, 1.5) < sparsity_ratio(17.0, 2.0, 1.0));
    CHECK(sparsity_ratio(18.0, 2.0, 1.0) > sparsity_ratio(17.0, 2.0, 1.0));
  }

  TEST_CASE("large logits do not overflow") {
    KvStore store(1);
    store.append(std::vector<double>{1000}, std::vector<double>{1});
    for (int i = 0; i < 10; ++i) store.append(std::vector<double>{999.0 - i}, std::vector<double>{0});
    std::vector<double> q{1};
    LfpsConfig c = testing::small_config(1, 1, 1);
    HeadStats st = compute_head_stats(store, q, c);
    SparsityEstimate e = estimate_sparsity(q, store, st, c);
    CHECK(std::isfinite(e.rho));
    CHECK(e.rho > 0.0);
    CHECK(e.rho < 1.0);
  }

  TEST_CASE("estimate and exact sink share agree on the side of epsilon") {
    // Small heads with a planted sink of random strength.
    constexpr std::size_t n = 32, d = 8;
    constexpr double eps = 0.85;
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> strength(0.0, 4.0);
    LfpsConfig c = testing::small_config(d, 1, 1);
    c.local_window = 6;
    int agree = 0, above = 0;
    const int draws = 500;
    for (int t = 0; t < draws; ++t) {
      auto q = testing::gaussian(rng, d);
      const double qn = std::sqrt(dot_reference(q, q));
      KvStore store(d);
      std::vector<double> sink(d);
      const double g = strength(rng) * std::sqrt(static_cast<double>(d)) / qn;
      for (std::size_t i = 0; i < d; ++i) sink[i] = g * q[i] + 0.1 * testing::gaussian(rng, 1)[0];
      store.append(sink, testing::gaussian(rng, d));
      for (std::size_t i = 1; i < n; ++i) {
        store.append(testing::gaussian(rng, d, 0.5), testing::gaussian(rng, d));
      }
      HeadStats st = compute_head_stats(store, q, c);
      SparsityEstimate e = estimate_sparsity(q, store, st, c);
      const double exact = full_sink_share(q, store, 1);
      if ((e.rho > eps) == (exact > eps)) ++agree;
      if (exact > eps) ++above;
    }
    MESSAGE("agreement ", agree, "/", draws, ", exact above epsilon in ", above);
    CHECK(above > draws / 10);
    CHECK(above < draws * 9 / 10);
    CHECK(agree >= draws * 9 / 10);
  }

  TEST_CASE("mean-only bypass returns the mean value bit for bit") {
    std::mt19937_64 rng(23);
    KvStore store = testing::random_store(rng, 40, 5);
    auto q = testing::gaussian(rng, 5);
    LfpsConfig c = testing::small_config(5, 1, 2);
    c.bypass_mode = BypassMode::mean_only;
    HeadStats st = compute_head_stats(store, q, c);
    auto out = bypass_output(q, st, c);
    CHECK(std::memcmp(out.data(), st.mean_value.data(), 5 * sizeof(double)) == 0);
  }

  TEST_CASE("a dominant sink makes the bypass output its value") {
    std::mt19937_64 rng(24);
    KvStore store(4);
    std::vector<double> q{1, 0, 0, 0};
    store.append(std::vector<double>{1e3, 0, 0, 0}, std::vector<double>{7, -3, 2, 1});
    for (int i = 0; i < 30; ++i) store.append(testing::gaussian(rng, 4), testing::gaussian(rng, 4));
    LfpsConfig c = testing::small_config(4, 1, 1);
    HeadStats st = compute_head_stats(store, q, c);
    auto out = bypass_output(q, st, c);
    CHECK(testing::max_rel_diff(out, {7, -3, 2, 1}) < 1e-12);
  }

  TEST_CASE("single-sink blend matches hand softmax arithmetic") {
    HeadStats st;
    st.d = 1;
    st.sink_keys = {1.0};
    st.sink_values = {10.0};
    st.mean_key = {0.5};
    st.mean_value = {2.0};
    st.sigma_hat_sq = 0.25;
    LfpsConfig c = testing::small_config(1, 1, 1);
    // Sink logit 2; mean-key logit 1 + 4 * 0.25 / 2 = 1.5.
    auto out = bypass_output(std::vector<double>{2.0}, st, c);
    const double w_sink = 1.0 / (1.0 + std::exp(-0.5));
    CHECK(out[0] == doctest::Approx(w_sink * 10.0 + (1.0 - w_sink) * 2.0).epsilon(1e-14));
  }

  TEST_CASE("gate preconditions") {
    std::mt19937_64 rng(25);
    KvStore store = testing::random_store(rng, 8, 2);
    LfpsConfig c = testing::small_config(2, 1, 2);
    c.local_window = 6;
    auto q = testing::gaussian(rng, 2);
    HeadStats st = compute_head_stats(store, q, c);
    CHECK_THROWS_AS(estimate_sparsity(q, store, st, c), Error);  // n == sinks + window
    CHECK_THROWS_AS(estimate_sparsity(std::vector<double>{1}, store, st, c), Error);
    CHECK_THROWS_AS(compute_head_stats(store, std::vector<double>{0, 0}, c), Error);
  }
}
