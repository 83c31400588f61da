#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spikecode/network.hpp"

namespace spikecode {

struct GradientSample {
  Eigen::Index parameter = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckOptions {
  std::size_t samples = 100;
  double step = 1e-5;
  /// Denominator floor for the relative error of near-zero gradients.
  double floor = 1e-8;
  std::uint64_t seed = 0;
};

/// Compares backward_bptt against central differences of the relaxed forward
/// pass on `samples` distinct parameters drawn without replacement.
template <typename Scalar>
std::vector<GradientSample> check_gradients(SpikingNetwork<Scalar> net, const Mat<Scalar>& input,
                                            const BatchGeometry& g, const Mat<Scalar>& target,
                                            ForwardOptions<Scalar> options,
                                            const GradientCheckOptions& check = {}) {
  options.mode = SpikeMode::relaxed;
  const auto rec = forward(net, input, g, options);
  Mat<Scalar> grad;
  loss_residual_mse(rec.residual, target, &grad);
  const auto grads = backward_bptt(net, rec, grad);

  const Eigen::Index n = net.parameter_count();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(check.seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), check.samples));

  auto loss_at = [&](Eigen::Index i, Scalar value) {
    const Scalar saved = net.parameter(i);
    net.parameter(i) = value;
    const auto r = forward(net, input, g, options);
    net.parameter(i) = saved;
    return static_cast<double>(loss_residual_mse(r.residual, target));
  };

  std::vector<GradientSample> out;
  for (Eigen::Index i : order) {
    const Scalar theta = net.parameter(i);
    const Scalar h = Scalar(check.step);
    GradientSample s;
    s.parameter = i;
    s.analytic = static_cast<double>(grads.flat(i));
    s.numeric = (loss_at(i, theta + h) - loss_at(i, theta - h)) / (2.0 * static_cast<double>(h));
    const double scale = std::max({std::abs(s.analytic), std::abs(s.numeric), check.floor});
    s.relative_error = std::abs(s.analytic - s.numeric) / scale;
    out.push_back(s);
  }
  return out;
}

}  // namespace spikecode
