#include "lfps/kv_store.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "lfps/error.hpp"

namespace lfps {

KvStore::KvStore(std::size_t d) : d_(d) {
  if (d == 0) throw Error(Errc::invalid_argument, "kv store: d must be >= 1");
}

KvStore::KvStore(const KvStore& other) : d_(other.d_) {
  auto lock = other.read_lock();
  keys_ = other.keys_;
  values_ = other.values_;
  n_.store(other.n_.load(std::memory_order_acquire), std::memory_order_release);
}

KvStore& KvStore::operator=(const KvStore& other) {
  if (this == &other) return *this;
  KvStore copy(other);
  *this = std::move(copy);
  return *this;
}

KvStore::KvStore(KvStore&& other) noexcept
    : d_(other.d_),
      keys_(std::move(other.keys_)),
      values_(std::move(other.values_)),
      n_(other.n_.load(std::memory_order_acquire)) {
  other.n_.store(0, std::memory_order_release);
}

KvStore& KvStore::operator=(KvStore&& other) noexcept {
  if (this == &other) return *this;
  std::unique_lock lock(mutex_);
  d_ = other.d_;
  keys_ = std::move(other.keys_);
  values_ = std::move(other.values_);
  n_.store(other.n_.load(std::memory_order_acquire), std::memory_order_release);
  other.n_.store(0, std::memory_order_release);
  return *this;
}

void KvStore::append(std::span<const double> key, std::span<const double> value) {
  if (key.size() != d_ || value.size() != d_) {
    throw Error(Errc::dimension_mismatch,
                "kv store: expected rows of length " + std::to_string(d_) + ", got key " +
                    std::to_string(key.size()) + " and value " + std::to_string(value.size()));
  }
  append_checked(key.data(), value.data());
}

void KvStore::append(std::span<const float> key, std::span<const float> value) {
  if (key.size() != d_ || value.size() != d_) {
    throw Error(Errc::dimension_mismatch,
                "kv store: expected rows of length " + std::to_string(d_) + ", got key " +
                    std::to_string(key.size()) + " and value " + std::to_string(value.size()));
  }
  std::vector<double> k(key.begin(), key.end());
  std::vector<double> v(value.begin(), value.end());
  append_checked(k.data(), v.data());
}

void KvStore::append_checked(const double* key, const double* value) {
  std::unique_lock lock(mutex_);
  const std::size_t n = n_.load(std::memory_order_relaxed);
  keys_.insert(keys_.end(), key, key + d_);
  try {
    values_.insert(values_.end(), value, value + d_);
  } catch (...) {
    keys_.resize(n * d_);
    throw;
  }
  n_.store(n + 1, std::memory_order_release);
}

void KvStore::reserve(std::size_t rows) {
  std::unique_lock lock(mutex_);
  const std::size_t want = rows * d_;
  if (want <= keys_.capacity()) return;
  // Geometric growth keeps per-step reserve(n + 1) amortized O(1).
  const std::size_t cap = std::max(want, keys_.capacity() + keys_.capacity() / 2);
  keys_.reserve(cap);
  values_.reserve(cap);
}

bool KvStore::same_contents(const KvStore& other) const {
  if (d_ != other.d_ || size() != other.size()) return false;
  const std::size_t bytes = size() * d_ * sizeof(double);
  if (bytes == 0) return true;
  return std::memcmp(keys_.data(), other.keys_.data(), bytes) == 0 &&
         std::memcmp(values_.data(), other.values_.data(), bytes) == 0;
}

}  // namespace lfps
