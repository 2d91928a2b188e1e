#include "lfps/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lfps/error.hpp"
#include "lfps/numeric.hpp"

namespace lfps {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Box-Muller on top of mt19937_64, whose output sequence is fixed by the
// standard; std::normal_distribution is not, so it would break byte-identical
// traces across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : engine_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void normalize(std::span<double> v) {
  const double norm = std::sqrt(squared_norm(v));
  for (double& x : v) x /= norm;
}

// Random unit vector orthogonal to `u` (itself unit length).
void draw_orthogonal(Gaussian& g, std::span<const double> u, std::span<double> out) {
  for (double& x : out) x = g();
  const double proj = dot(out, u);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] -= proj * u[c];
  normalize(out);
}

float to_f32(double v) { return static_cast<float>(v); }

void gen_head(const SyntheticSpec& spec, std::size_t head_in_layer, std::uint64_t stream_seed,
              HeadTrace& out) {
  const std::size_t d = spec.d;
  const std::size_t n = spec.n_prefill;
  const std::size_t total = n + spec.steps;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double radius = spec.noise_scale * sqrt_d;
  const double coh = spec.query_coherence;
  const double coh_perp = std::sqrt(1.0 - coh * coh);
  const double lam = spec.pattern_strength;
  const double lam_perp = std::sqrt(1.0 - lam * lam);
  Gaussian g(stream_seed);

  std::vector<double> u(d);
  for (double& x : u) x = g();
  normalize(u);

  // Per-position query directions orthogonal to the shared one.
  std::vector<double> z(total * d);
  for (std::size_t p = 0; p < total; ++p) draw_orthogonal(g, u, {z.data() + p * d, d});

  // Positional importance: moving sum of iid normals, unit variance.
  const std::size_t cw = spec.cluster_width;
  std::vector<double> iid(total + cw - 1);
  for (double& x : iid) x = g();
  std::vector<double> importance(total, 0.0);
  double window = 0.0;
  for (std::size_t i = 0; i < cw; ++i) window += iid[i];
  for (std::size_t p = 0; p < total; ++p) {
    importance[p] = window / std::sqrt(static_cast<double>(cw));
    if (p + cw < iid.size()) window += iid[p + cw] - iid[p];
  }

  std::vector<double> queries(total * d), keys(total * d), values(total * d);
  std::vector<double> xi(d);
  for (std::size_t p = 0; p < total; ++p) {
    draw_orthogonal(g, u, xi);
    for (std::size_t c = 0; c < d; ++c) {
      queries[p * d + c] = radius * (coh * u[c] + coh_perp * z[p * d + c]);
      keys[p * d + c] = radius * (lam * importance[p] * u[c] + lam_perp * xi[c]);
      values[p * d + c] = g();
    }
  }

  // Boosts are expressed in logits: q_p . dk / sqrt(d) == gain.
  const double along_u = sqrt_d / (radius * coh);
  for (std::size_t v : spec.vertical_positions) {
    for (std::size_t c = 0; c < d; ++c) keys[v * d + c] += spec.signal_gain * along_u * u[c];
  }
  const double along_z = sqrt_d / (radius * coh_perp);
  for (std::size_t o : spec.slash_offsets) {
    for (std::size_t b = 0; b < spec.slash_band; ++b) {
      const std::size_t lag = o + b;
      for (std::size_t p = lag; p < total; ++p) {
        const std::size_t j = p - lag;
        for (std::size_t c = 0; c < d; ++c) {
          keys[j * d + c] += spec.slash_gain * along_z * z[p * d + c];
        }
      }
    }
  }
  const double sink_boost =
      spec.sink_gain * static_cast<double>(head_in_layer + 1) / static_cast<double>(spec.heads);
  for (std::size_t i = 0; i < spec.sink_count; ++i) {
    for (std::size_t c = 0; c < d; ++c) keys[i * d + c] += sink_boost * along_u * u[c];
  }

  // Round to storage precision first so that the stored prefill weights are
  // exactly the softmax of the stored vectors.
  for (auto* v : {&queries, &keys, &values}) {
    for (double& x : *v) x = static_cast<double>(to_f32(x));
  }

  out.keys.resize(n * d);
  out.values.resize(n * d);
  for (std::size_t i = 0; i < n * d; ++i) {
    out.keys[i] = to_f32(keys[i]);
    out.values[i] = to_f32(values[i]);
  }
  out.last_query.assign(queries.begin() + (n - 1) * d, queries.begin() + n * d);

  const std::size_t s = spec.prefill_window;
  const std::size_t sinks = spec.sink_count;
  const std::size_t width = n - sinks;
  out.weights.assign(s * width, 0.0f);
  std::vector<double> logits(n);
  for (std::size_t row = 0; row < s; ++row) {
    const std::size_t p = n - s + row;  // oldest first
    std::span<const double> q(queries.data() + p * d, d);
    double max_logit = -INFINITY;
    for (std::size_t i = 0; i <= p; ++i) {
      logits[i] = dot(q, std::span<const double>(keys.data() + i * d, d)) / sqrt_d;
      max_logit = std::max(max_logit, logits[i]);
    }
    double all = 0.0, non_sink = 0.0;
    for (std::size_t i = 0; i <= p; ++i) {
      logits[i] = std::exp(logits[i] - max_logit);
      all += logits[i];
      if (i >= sinks) non_sink += logits[i];
    }
    for (std::size_t i = sinks; i <= p; ++i) {
      out.weights[row * width + (i - sinks)] = to_f32(logits[i] / non_sink);
    }
    if (row + 1 == s) out.weight_scale = to_f32(all / non_sink);
  }

  const std::size_t steps = spec.steps;
  out.queries.assign(queries.begin() + n * d, queries.end());
  out.new_keys.resize(steps * d);
  out.new_values.resize(steps * d);
  for (std::size_t i = 0; i < steps * d; ++i) {
    out.new_keys[i] = to_f32(keys[n * d + i]);
    out.new_values[i] = to_f32(values[n * d + i]);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::invalid_argument, "synthetic: " + what);
  };
  require(layers >= 1 && heads >= 1, "layers and heads must be >= 1");
  require(d >= 2, "d must be >= 2");
  require(prefill_window >= 1, "prefill window must be >= 1");
  require(n_prefill > sink_count + prefill_window, "n_prefill must exceed sink_count + window");
  require(noise_scale > 0.0 && std::isfinite(noise_scale), "noise_scale must be > 0");
  require(query_coherence > 0.0 && query_coherence < 1.0, "query_coherence must lie in (0, 1)");
  require(pattern_strength >= 0.0 && pattern_strength < 1.0,
          "pattern_strength must lie in [0, 1)");
  require(cluster_width >= 1, "cluster_width must be >= 1");
  require(signal_gain >= 0.0 && std::isfinite(signal_gain), "signal_gain must be >= 0");
  require(slash_gain >= 0.0 && std::isfinite(slash_gain), "slash_gain must be >= 0");
  require(std::isfinite(sink_gain), "sink_gain must be finite");
  const std::size_t total = n_prefill + steps;
  for (std::size_t v : vertical_positions) {
    require(v >= sink_count && v < total,
            "vertical position " + std::to_string(v) + " out of range");
  }
  for (std::size_t o : slash_offsets) {
    require(o >= 1 && o + slash_band <= total,
            "slash offset " + std::to_string(o) + " out of range");
  }
}

TraceFile gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  TraceFile trace;
  trace.header.layers = spec.layers;
  trace.header.heads = spec.heads;
  trace.header.d = spec.d;
  trace.header.n_prefill = spec.n_prefill;
  trace.header.steps = spec.steps;
  trace.header.prefill_window = spec.prefill_window;
  trace.header.sink_count = spec.sink_count;
  trace.header.value_encoding = kEncodingF32;
  trace.heads.resize(spec.layers * spec.heads);
  for (std::size_t i = 0; i < trace.heads.size(); ++i) {
    gen_head(spec, i % spec.heads, splitmix64(spec.seed ^ splitmix64(i)), trace.heads[i]);
  }
  return trace;
}

}  // namespace lfps
