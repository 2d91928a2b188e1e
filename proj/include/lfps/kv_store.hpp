#pragma once

#include <atomic>
#include <cstddef>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <vector>

namespace lfps {

// Append-only per-head key/value rows in host memory, row-major.
//
// One writer, many readers: `append` takes the exclusive lock, readers that
// run concurrently with a writer hold `read_lock()` for as long as they use
// spans into the store. Single-threaded callers may skip the lock.
class KvStore {
 public:
  explicit KvStore(std::size_t d);

  KvStore(const KvStore& other);
  KvStore& operator=(const KvStore& other);
  KvStore(KvStore&& other) noexcept;
  KvStore& operator=(KvStore&& other) noexcept;

  std::size_t dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return n_.load(std::memory_order_acquire); }

  void append(std::span<const double> key, std::span<const double> value);
  void append(std::span<const float> key, std::span<const float> value);

  // Makes room for `rows` rows so a later append cannot fail on allocation.
  void reserve(std::size_t rows);

  std::span<const double> key(std::size_t i) const { return {keys_.data() + i * d_, d_}; }
  std::span<const double> value(std::size_t i) const { return {values_.data() + i * d_, d_}; }

  std::shared_lock<std::shared_mutex> read_lock() const { return std::shared_lock(mutex_); }

  // Bitwise equality of dimension and all rows.
  bool same_contents(const KvStore& other) const;

 private:
  void append_checked(const double* key, const double* value);

  std::size_t d_;
  std::vector<double> keys_;
  std::vector<double> values_;
  std::atomic<std::size_t> n_{0};
  mutable std::shared_mutex mutex_;
};

}  // namespace lfps
