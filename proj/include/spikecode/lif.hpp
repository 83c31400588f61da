#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikecode {

/// Parameters of a discrete-time leaky integrate-and-fire neuron.
///
/// The membrane follows V[n] = V[n-1] + (V_reset - V[n-1] + x[n]) / tau and
/// fires whenever V[n] >= v_th, after which it is hard-reset to v_reset.
template <typename Scalar = double>
struct LifParams {
  Scalar v_th = Scalar(1);
  Scalar tau = Scalar(2);
  Scalar v_reset = Scalar(0);

  /// Throws std::invalid_argument unless v_th > 0 and tau > 1.
  void validate() const {
    if (!(v_th > Scalar(0)) || !std::isfinite(double(v_th)))
      throw std::invalid_argument("LifParams: v_th must be positive and finite");
    if (!(tau > Scalar(1)) || !std::isfinite(double(tau)))
      throw std::invalid_argument("LifParams: tau must be finite and > 1");
    if (!std::isfinite(double(v_reset)))
      throw std::invalid_argument("LifParams: v_reset must be finite");
  }

  /// Per-step retention of the membrane, 1 - 1/tau.
  Scalar leak() const { return Scalar(1) - Scalar(1) / tau; }
  Scalar gain() const { return Scalar(1) / tau; }
  /// Input at and above which the neuron fires on every step.
  Scalar saturation_input() const { return v_th * tau; }
};

/// Fixed-length binary spike code.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  explicit SpikeTrain(std::size_t t_count) : bits_(t_count, 0) {}
  explicit SpikeTrain(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("SpikeTrain: bits must be 0 or 1");
  }
  /// Parses a string such as "01010101".
  static SpikeTrain from_string(const std::string& s) {
    std::vector<std::uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') throw std::invalid_argument("SpikeTrain: expected '0'/'1'");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return SpikeTrain(std::move(bits));
  }

  std::size_t t_count() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t n) const { return bits_[n]; }
  void set(std::size_t n, bool spike) { bits_.at(n) = spike ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }
  /// Index of the first spike, or t_count() when silent.
  std::size_t first_spike() const {
    for (std::size_t n = 0; n < bits_.size(); ++n)
      if (bits_[n]) return n;
    return bits_.size();
  }
  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t n = 0; n < bits_.size(); ++n)
      if (bits_[n]) s[n] = '1';
    return s;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Potentials are sampled after each update and before the reset.
template <typename Scalar = double>
struct MembraneTrace {
  std::vector<Scalar> potentials;
  SpikeTrain spikes;
};

template <typename Scalar>
struct MembraneStep {
  Scalar v_new;
  bool spiked;
};

/// One membrane update. `v_new` is the pre-reset potential; when `spiked`
/// the state carried into the next step is p.v_reset.
template <typename Scalar>
constexpr MembraneStep<Scalar> step_membrane(Scalar v_prev, Scalar x, const LifParams<Scalar>& p) {
  const Scalar v_new = v_prev + (-(v_prev - p.v_reset) + x) / p.tau;
  return {v_new, v_new >= p.v_th};
}

/// Drives a neuron, initially at rest, with a constant input for `t_count` steps.
template <typename Scalar>
MembraneTrace<Scalar> encode_lif(Scalar x, std::size_t t_count, const LifParams<Scalar>& p) {
  p.validate();
  if (t_count < 1) throw std::invalid_argument("encode_lif: t_count must be >= 1");
  MembraneTrace<Scalar> trace;
  trace.potentials.reserve(t_count);
  trace.spikes = SpikeTrain(t_count);
  Scalar v = p.v_reset;
  for (std::size_t n = 0; n < t_count; ++n) {
    const auto step = step_membrane(v, x, p);
    trace.potentials.push_back(step.v_new);
    trace.spikes.set(n, step.spiked);
    v = step.spiked ? p.v_reset : step.v_new;
  }
  return trace;
}

/// Rate decoding: fraction of timesteps carrying a spike.
inline double decode_rate(const SpikeTrain& s) {
  if (s.t_count() == 0) return 0.0;
  return static_cast<double>(s.count()) / static_cast<double>(s.t_count());
}

/// Smallest constant input for which a neuron at rest first fires on the
/// k-th step (k >= 1): v_th / (1 - (1 - 1/tau)^k).
///
/// Assumes v_reset = 0, the only case in which the boundaries are closed form.
template <typename Scalar>
Scalar quantization_boundary(int k, const LifParams<Scalar>& p) {
  p.validate();
  if (k < 1) throw std::invalid_argument("quantization_boundary: k must be >= 1");
  using std::expm1;
  using std::log1p;
  // 1 - (1 - 1/tau)^k, evaluated without cancellation for large k.
  const Scalar charged = -expm1(Scalar(k) * log1p(-Scalar(1) / p.tau));
  return p.v_th / charged;
}

/// One output code of the neuron under constant drive.
///
/// `charge_steps` counts the silent steps before the first spike, so a row
/// with charge_steps == c fires first at index c and has inputs in
/// [quantization_boundary(c + 1), quantization_boundary(c)). The row with
/// charge_steps == T is the one that stays silent for the whole window; its
/// interval runs from v_th up to quantization_boundary(T).
struct QuantizerRow {
  int charge_steps = 0;
  double firing_rate = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  SpikeTrain pattern;

  bool fires() const { return pattern.count() > 0; }
};

struct QuantizerTable {
  std::size_t t_count = 0;
  std::vector<QuantizerRow> rows;

  /// Number of distinct spike patterns (output codes).
  std::size_t code_count() const {
    std::vector<std::string> seen;
    for (const auto& r : rows) {
      auto s = r.pattern.to_string();
      bool dup = false;
      for (const auto& q : seen) dup = dup || q == s;
      if (!dup) seen.push_back(std::move(s));
    }
    return seen.size();
  }
  std::size_t distinct_rate_count() const {
    std::vector<double> seen;
    for (const auto& r : rows) {
      bool dup = false;
      for (double q : seen) dup = dup || q == r.firing_rate;
      if (!dup) seen.push_back(r.firing_rate);
    }
    return seen.size();
  }
};

/// Characterizes the neuron as a quantizer over `t_count` steps.
///
/// Rows are ordered by charge duration. The top row is capped at
/// `cap_factor * v_th * tau`. Each row's rate and pattern come from simulating
/// the midpoint of its interval.
inline QuantizerTable build_quantizer_table(std::size_t t_count, const LifParams<double>& p,
                                            double cap_factor = 1.5) {
  p.validate();
  if (t_count < 1) throw std::invalid_argument("build_quantizer_table: t_count must be >= 1");
  if (p.v_reset != 0.0)
    throw std::invalid_argument("build_quantizer_table: closed-form boundaries need v_reset = 0");
  if (!(cap_factor > 1.0)) throw std::invalid_argument("build_quantizer_table: cap_factor must be > 1");

  const int t = static_cast<int>(t_count);
  QuantizerTable table;
  table.t_count = t_count;
  table.rows.reserve(t_count + 1);
  for (int c = 0; c <= t; ++c) {
    QuantizerRow row;
    row.charge_steps = c;
    row.x_hi = c == 0 ? cap_factor * p.saturation_input() : quantization_boundary(c, p);
    row.x_lo = c == t ? p.v_th : quantization_boundary(c + 1, p);
    const double probe = 0.5 * (row.x_lo + row.x_hi);
    row.pattern = encode_lif(probe, t_count, p).spikes;
    row.firing_rate = decode_rate(row.pattern);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace spikecode
