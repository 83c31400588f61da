#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "spikecode/lif.hpp"

namespace spikecode {

enum class SurrogateShape { rectangular, triangular, fast_sigmoid };

/// Stand-in for the derivative of the spike threshold. Every shape integrates
/// to one over the potential axis and peaks at v_th.
template <typename Scalar = double>
struct SurrogateSpec {
  SurrogateShape shape = SurrogateShape::rectangular;
  Scalar width = Scalar(1);

  void validate() const {
    if (!(width > Scalar(0))) throw std::invalid_argument("SurrogateSpec: width must be positive");
  }
  template <typename Other>
  SurrogateSpec<Other> cast() const {
    return {shape, Other(width)};
  }
};

inline std::string_view to_string(SurrogateShape s) {
  switch (s) {
    case SurrogateShape::rectangular: return "rectangular";
    case SurrogateShape::triangular: return "triangular";
    case SurrogateShape::fast_sigmoid: return "fast-sigmoid";
  }
  return "?";
}

inline SurrogateShape parse_surrogate_shape(std::string_view s) {
  if (s == "rectangular") return SurrogateShape::rectangular;
  if (s == "triangular") return SurrogateShape::triangular;
  if (s == "fast-sigmoid") return SurrogateShape::fast_sigmoid;
  throw std::invalid_argument("unknown surrogate shape '" + std::string(s) + "'");
}

// Shapes, with u = v - v_th and w = width:
//   rectangular   1/w on |u| < w/2
//   triangular    (2/w) (1 - 2|u|/w) on |u| < w/2
//   fast-sigmoid  (1/w) / (1 + 2|u|/w)^2
template <typename Scalar>
Scalar surrogate_derivative(Scalar v, const SurrogateSpec<Scalar>& spec, const LifParams<Scalar>& p) {
  const Scalar u = std::abs(v - p.v_th);
  const Scalar w = spec.width;
  switch (spec.shape) {
    case SurrogateShape::rectangular: return u < w / 2 ? Scalar(1) / w : Scalar(0);
    case SurrogateShape::triangular: return u < w / 2 ? (Scalar(2) / w) * (Scalar(1) - Scalar(2) * u / w) : Scalar(0);
    case SurrogateShape::fast_sigmoid: {
      const Scalar d = Scalar(1) + Scalar(2) * u / w;
      return Scalar(1) / (w * d * d);
    }
  }
  return Scalar(0);
}

/// Antiderivative of surrogate_derivative rising from 0 to 1: the smoothed
/// spike used by the relaxed forward pass.
template <typename Scalar>
Scalar surrogate_spike(Scalar v, const SurrogateSpec<Scalar>& spec, const LifParams<Scalar>& p) {
  const Scalar u = v - p.v_th;
  const Scalar w = spec.width;
  const Scalar half = Scalar(0.5);
  switch (spec.shape) {
    case SurrogateShape::rectangular: {
      const Scalar s = u / w + half;
      return s < 0 ? Scalar(0) : (s > 1 ? Scalar(1) : s);
    }
    case SurrogateShape::triangular: {
      if (u <= -w / 2) return Scalar(0);
      if (u >= w / 2) return Scalar(1);
      const Scalar a = Scalar(2) * std::abs(u) / w;  // in [0, 1)
      const Scalar mass = half * (Scalar(1) - (Scalar(1) - a) * (Scalar(1) - a));
      return u < 0 ? half - mass : half + mass;
    }
    case SurrogateShape::fast_sigmoid: {
      const Scalar a = Scalar(2) * std::abs(u) / w;
      const Scalar mass = half * a / (Scalar(1) + a);
      return u < 0 ? half - mass : half + mass;
    }
  }
  return Scalar(0);
}

}  // namespace spikecode
