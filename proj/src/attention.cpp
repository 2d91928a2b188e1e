#include "lfps/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfps/error.hpp"

namespace lfps {

double scaled_logit(std::span<const double> q, const KvStore& store, Position p) {
  return dot(q, store.key(p)) / std::sqrt(static_cast<double>(store.dim()));
}

namespace {

// x ranks ahead of y: higher score, then lower position. Used as the heap
// comparator, it keeps the weakest retained entry at the front.
struct Stronger {
  bool operator()(const IndexedValue& x, const IndexedValue& y) const {
    if (x.value != y.value) return x.value > y.value;
    return x.index < y.index;
  }
};

}  // namespace

IndexedValues exact_topk_restricted(std::span<const double> q, const KvStore& store,
                                    const IndexSet& probe, std::size_t k) {
  if (probe.empty()) throw Error(Errc::invalid_argument, "top-k: empty probe set");
  if (k == 0) throw Error(Errc::invalid_argument, "top-k: k must be >= 1");
  if (q.size() != store.dim()) throw Error(Errc::dimension_mismatch, "top-k: query length");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(store.dim()));
  const std::size_t keep = std::min(k, probe.size());

  // Probe rows are scattered, so fetch a few rows ahead of the dot product.
  constexpr std::size_t kAhead = 4;
  const std::size_t row_bytes = store.dim() * sizeof(double);
  auto prefetch_row = [&](Position p) {
    const char* row = reinterpret_cast<const char*>(store.key(p).data());
    for (std::size_t b = 0; b < row_bytes; b += 64) __builtin_prefetch(row + b);
  };
  auto logit_at = [&](std::size_t i) {
    if (i + kAhead < probe.size()) prefetch_row(probe[i + kAhead]);
    return IndexedValue{probe[i], dot(q, store.key(probe[i])) * inv_sqrt_d};
  };
  for (std::size_t i = 0; i < std::min(kAhead, probe.size()); ++i) prefetch_row(probe[i]);

  // Both strategies return the first `keep` rows under the strict order
  // (logit desc, position asc), so the result does not depend on the choice.
  IndexedValues out;
  if (keep * 16 < probe.size()) {
    // Few winners: a bounded heap rejects most rows with one comparison.
    Stronger stronger;
    out.reserve(keep);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const IndexedValue e = logit_at(i);
      if (out.size() < keep) {
        out.push_back(e);
        std::push_heap(out.begin(), out.end(), stronger);
      } else if (stronger(e, out.front())) {
        std::pop_heap(out.begin(), out.end(), stronger);
        out.back() = e;
        std::push_heap(out.begin(), out.end(), stronger);
      }
    }
  } else {
    // Many winners: the heap would pay log k on nearly every row.
    out.resize(probe.size());
    for (std::size_t i = 0; i < probe.size(); ++i) out[i] = logit_at(i);
    if (keep < out.size()) {
      std::nth_element(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep - 1), out.end(),
                       Stronger{});
      out.resize(keep);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const IndexedValue& x, const IndexedValue& y) { return x.index < y.index; });
  return out;
}

AttentionOutput attention_output(const KvStore& store, const IndexedValues& selected_logits,
                                 const IndexedValues& sink_logits) {
  if (selected_logits.empty()) throw Error(Errc::invalid_argument, "attention: empty C2");
  IndexedValues logits;
  logits.reserve(selected_logits.size() + sink_logits.size());
  std::merge(sink_logits.begin(), sink_logits.end(), selected_logits.begin(),
             selected_logits.end(), std::back_inserter(logits),
             [](const IndexedValue& x, const IndexedValue& y) { return x.index < y.index; });

  AttentionOutput out;
  out.weights = softmax_restricted(logits);
  out.output.assign(store.dim(), 0.0);
  for (const auto& w : out.weights) {
    auto v = store.value(w.index);
    for (std::size_t c = 0; c < v.size(); ++c) out.output[c] += w.value * v[c];
  }
  return out;
}

AttentionOutput attention_output(std::span<const double> q, const KvStore& store,
                                 const IndexSet& c2, std::size_t sink_count) {
  IndexedValues selected, sinks;
  selected.reserve(c2.size());
  for (Position p : c2) selected.push_back({p, scaled_logit(q, store, p)});
  for (Position p = 0; p < std::min(sink_count, store.size()); ++p) {
    sinks.push_back({p, scaled_logit(q, store, p)});
  }
  return attention_output(store, selected, sinks);
}

AttentionOutput full_attention_oracle(std::span<const double> q, const KvStore& store) {
  const std::size_t n = store.size();
  const std::size_t d = store.dim();
  if (n == 0) throw Error(Errc::invalid_argument, "full attention: empty store");
  std::vector<double> logits(n);
  double max_logit = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = dot_reference(q, store.key(i)) / std::sqrt(static_cast<double>(d));
    max_logit = std::max(max_logit, logits[i]);
  }
  AttentionOutput out;
  out.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = {i, std::exp(logits[i] - max_logit)};
    total += out.weights[i].value;
  }
  out.output.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i].value /= total;
    auto v = store.value(i);
    for (std::size_t c = 0; c < d; ++c) out.output[c] += out.weights[i].value * v[c];
  }
  return out;
}

IndexSet topk_oracle(std::span<const double> q, const KvStore& store, std::size_t k,
                     std::size_t sink_count) {
  if (k == 0) throw Error(Errc::invalid_argument, "top-k oracle: k must be >= 1");
  const std::size_t n = store.size();
  std::vector<IndexedValue> all;
  for (std::size_t i = sink_count; i < n; ++i) {
    all.push_back({i, dot(q, store.key(i)) / std::sqrt(static_cast<double>(store.dim()))});
  }
  std::sort(all.begin(), all.end(), [](const IndexedValue& x, const IndexedValue& y) {
    if (x.value != y.value) return x.value > y.value;
    return x.index < y.index;
  });
  all.resize(std::min(k, all.size()));
  IndexSet out;
  out.reserve(all.size());
  for (const auto& e : all) out.push_back(e.index);
  std::sort(out.begin(), out.end());
  return out;
}

OverlapReport overlap_ratio(const IndexSet& c, const IndexSet& exact, std::size_t k) {
  if (k == 0) throw Error(Errc::invalid_argument, "overlap: k must be >= 1");
  if (exact.size() != k) throw Error(Errc::invalid_argument, "overlap: |exact| must equal k");
  OverlapReport r;
  r.k = k;
  r.intersection = intersection_size(c, exact);
  r.eta = static_cast<double>(r.intersection) / static_cast<double>(k);
  return r;
}

double output_error(std::span<const double> approx, std::span<const double> exact) {
  if (approx.size() != exact.size()) {
    throw Error(Errc::dimension_mismatch, "output error: length mismatch");
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double e = approx[i] - exact[i];
    diff += e * e;
    ref += exact[i] * exact[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

}  // namespace lfps
