#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spikecode/conv.hpp"
#include "spikecode/lif.hpp"
#include "spikecode/rate_coder.hpp"
#include "spikecode/surrogate.hpp"

namespace spikecode {

/// How the analog input reaches the first spiking layer.
enum class InputCoding {
  lif,   // constant analog current into the first layer's membranes
  rate,  // Bernoulli spike trains of the clamped input, then the first convolution
};

enum class Readout { membrane_mean };

inline std::string_view to_string(InputCoding c) { return c == InputCoding::lif ? "lif" : "rate"; }
inline InputCoding parse_input_coding(std::string_view s) {
  if (s == "lif") return InputCoding::lif;
  if (s == "rate") return InputCoding::rate;
  throw std::invalid_argument("unknown input coding '" + std::string(s) + "'");
}
inline std::string_view to_string(Readout) { return "membrane-mean"; }
inline Readout parse_readout(std::string_view s) {
  if (s == "membrane-mean") return Readout::membrane_mean;
  throw std::invalid_argument("unsupported readout '" + std::string(s) + "'");
}

struct NetworkConfig {
  int depth = 5;
  int channels = 32;
  int kernel = 3;
  std::size_t t_count = 7;
  LifParams<double> lif{};
  Readout readout = Readout::membrane_mean;
  InputCoding coding = InputCoding::lif;

  void validate() const {
    if (depth < 2) throw std::invalid_argument("NetworkConfig: depth must be >= 2");
    if (channels < 1) throw std::invalid_argument("NetworkConfig: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("NetworkConfig: kernel must be odd");
    if (t_count < 1) throw std::invalid_argument("NetworkConfig: T must be >= 1");
    lif.validate();
  }
  int in_channels(int layer) const { return layer == 0 ? 1 : channels; }
  int out_channels(int layer) const { return layer == depth - 1 ? 1 : channels; }
  /// Layers 0 .. depth-2 spike; the last one is the readout.
  int spiking_layers() const { return depth - 1; }
};

/// One convolution. Weight columns follow the im2col row order
/// (dy * k + dx) * in + c.
template <typename Scalar>
struct ConvLayer {
  int in = 1, out = 1, k = 3;
  Mat<Scalar> weights;
  Vec<Scalar> bias;

  ConvLayer() = default;
  ConvLayer(int in_ch, int out_ch, int kernel)
      : in(in_ch), out(out_ch), k(kernel), weights(Mat<Scalar>::Zero(out_ch, in_ch * kernel * kernel)),
        bias(Vec<Scalar>::Zero(out_ch)) {}

  Eigen::Index fan_in() const { return Eigen::Index(in) * k * k; }
  /// Element (o, i, dy, dx) of the out x in x k x k kernel tensor.
  Scalar& at(int o, int i, int dy, int dx) { return weights(o, (dy * k + dx) * in + i); }
  Scalar at(int o, int i, int dy, int dx) const { return weights(o, (dy * k + dx) * in + i); }
};

/// Spiking residual network: R(y), the estimated noise of a noisy input y.
template <typename Scalar>
class SpikingNetwork {
 public:
  SpikingNetwork() = default;

  /// Zero weights and biases.
  explicit SpikingNetwork(const NetworkConfig& config) : config_(config) {
    config_.validate();
    for (int l = 0; l < config_.depth; ++l)
      layers_.emplace_back(config_.in_channels(l), config_.out_channels(l), config_.kernel);
  }

  /// Fan-in scaled uniform init U(-b, b), b = gain * sqrt(6 / fan_in), on the
  /// spiking layers. The readout starts at zero so that R(y) = 0 initially.
  /// Biases are zero.
  static SpikingNetwork initialized(const NetworkConfig& config, std::uint64_t seed, double spiking_gain = 3.0) {
    SpikingNetwork net(config);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < config.spiking_layers(); ++l) {
      auto& layer = net.layers_[static_cast<std::size_t>(l)];
      const double bound = spiking_gain * std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
        layer.weights.data()[i] = Scalar((2.0 * uniform01(rng) - 1.0) * bound);
    }
    return net;
  }

  const NetworkConfig& config() const { return config_; }
  std::vector<ConvLayer<Scalar>>& layers() { return layers_; }
  const std::vector<ConvLayer<Scalar>>& layers() const { return layers_; }
  const ConvLayer<Scalar>& layer(int l) const { return layers_.at(static_cast<std::size_t>(l)); }
  ConvLayer<Scalar>& layer(int l) { return layers_.at(static_cast<std::size_t>(l)); }
  LifParams<Scalar> lif() const { return {Scalar(config_.lif.v_th), Scalar(config_.lif.tau), Scalar(config_.lif.v_reset)}; }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }
  /// Flat parameter view: per layer, the weight matrix in storage order, then the bias.
  Scalar& parameter(Eigen::Index i) {
    for (auto& l : layers_) {
      if (i < l.weights.size()) return l.weights.data()[i];
      i -= l.weights.size();
      if (i < l.bias.size()) return l.bias[i];
      i -= l.bias.size();
    }
    throw std::out_of_range("SpikingNetwork::parameter");
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  template <typename Other>
  SpikingNetwork<Other> cast() const {
    SpikingNetwork<Other> out(config_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weights = layers_[l].weights.template cast<Other>();
      out.layers()[l].bias = layers_[l].bias.template cast<Other>();
    }
    return out;
  }

 private:
  NetworkConfig config_{};
  std::vector<ConvLayer<Scalar>> layers_;
};

enum class SpikeMode {
  binary,   // Heaviside spikes
  relaxed,  // spikes replaced by the surrogate antiderivative
};

template <typename Scalar>
struct ForwardOptions {
  SpikeMode mode = SpikeMode::binary;
  SurrogateSpec<Scalar> surrogate{};
  std::uint64_t input_seed = 0;  // rate input coding only
};

/// Everything backward_bptt needs, plus the residual.
template <typename Scalar>
struct ForwardRecord {
  BatchGeometry geometry;
  SpikeMode mode = SpikeMode::binary;
  SurrogateSpec<Scalar> surrogate{};
  Mat<Scalar> input;                                // 1 x N
  std::vector<Mat<Scalar>> input_spikes;            // [t], rate coding only
  std::vector<std::vector<Mat<Scalar>>> potential;  // [layer][t], pre-reset membrane
  std::vector<std::vector<Mat<Scalar>>> spikes;     // [layer][t], emitted
  // Binary mode only: the same spikes as event lists for the sparse kernels.
  std::vector<SpikeList> input_events;
  std::vector<std::vector<SpikeList>> events;
  Mat<Scalar> residual;                             // 1 x N

  std::size_t t_count() const { return potential.empty() ? 0 : potential.front().size(); }
};

template <typename Scalar>
struct Gradients {
  std::vector<Mat<Scalar>> weights;
  std::vector<Vec<Scalar>> bias;

  static Gradients zeros_like(const SpikingNetwork<Scalar>& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
      g.weights.push_back(Mat<Scalar>::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(Vec<Scalar>::Zero(l.bias.size()));
    }
    return g;
  }
  Scalar flat(Eigen::Index i) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (i < weights[l].size()) return weights[l].data()[i];
      i -= weights[l].size();
      if (i < bias[l].size()) return bias[l][i];
      i -= bias[l].size();
    }
    throw std::out_of_range("Gradients::flat");
  }
};

namespace detail {

template <typename Scalar>
Mat<Scalar> emit_all(const Mat<Scalar>& u, SpikeMode mode, const SurrogateSpec<Scalar>& surrogate,
                     const LifParams<Scalar>& p) {
  if (mode == SpikeMode::relaxed) return u.unaryExpr([&](Scalar v) { return surrogate_spike(v, surrogate, p); });
  return (u.array() >= p.v_th).template cast<Scalar>().matrix();
}

/// out = W * im2col(src) + b, through the event kernel when `events` is given.
template <typename Scalar>
void convolve(const ConvLayer<Scalar>& layer, const Mat<Scalar>& src, const SpikeList* events, const BatchGeometry& g,
              Mat<Scalar>& cols, Mat<Scalar>& out) {
  if (events) {
    out.setZero(layer.out, g.pixels());
    conv_spikes_add(layer.weights, *events, g, layer.k, out);
  } else {
    im2col(src, g, layer.k, cols);
    out.noalias() = layer.weights * cols;
  }
  out.colwise() += layer.bias;
}

/// grad += d_out * im2col(src)^T.
template <typename Scalar>
void accumulate_weight_grad(const Mat<Scalar>& d_out, const Mat<Scalar>& src, const SpikeList* events,
                            const BatchGeometry& g, int k, Mat<Scalar>& cols, Mat<Scalar>& grad) {
  if (events) {
    conv_spikes_weight_grad(d_out, *events, g, k, grad);
  } else {
    im2col(src, g, k, cols);
    grad.noalias() += d_out * cols.transpose();
  }
}

}  // namespace detail

/// Spikes emitted by spiking layer `layer` at step `t`: channels x N.
template <typename Scalar>
const Mat<Scalar>& spike_record(const ForwardRecord<Scalar>& rec, int layer, std::size_t t) {
  return rec.spikes.at(static_cast<std::size_t>(layer)).at(t);
}

/// Simulates the network for T steps on a batch of inputs (1 x N).
///
/// Spiking layers follow the LIF recurrence with hard reset. The readout
/// layer is a non-spiking membrane with the same leak driven by the last
/// spiking layer; the residual is its mean over the T steps.
template <typename Scalar>
ForwardRecord<Scalar> forward(const SpikingNetwork<Scalar>& net, const Mat<Scalar>& input, const BatchGeometry& g,
                              const ForwardOptions<Scalar>& options = {}) {
  const auto& cfg = net.config();
  if (input.rows() != 1 || input.cols() != g.pixels() || g.pixels() == 0)
    throw std::invalid_argument("forward: input shape does not match batch geometry");
  if (static_cast<int>(net.layers().size()) != cfg.depth)
    throw std::invalid_argument("forward: network layers do not match config");
  options.surrogate.validate();

  const auto p = net.lif();
  const Scalar leak = p.leak(), gain = p.gain();
  const std::size_t T = cfg.t_count;
  const int hidden = cfg.spiking_layers();

  ForwardRecord<Scalar> rec;
  rec.geometry = g;
  rec.mode = options.mode;
  rec.surrogate = options.surrogate;
  rec.input = input;
  rec.potential.assign(static_cast<std::size_t>(hidden), {});

  const bool binary = options.mode == SpikeMode::binary;
  rec.spikes.assign(static_cast<std::size_t>(hidden), {});
  if (binary) rec.events.assign(static_cast<std::size_t>(hidden), {});

  Mat<Scalar> cols, current, analog_current;
  if (cfg.coding == InputCoding::lif) detail::convolve(net.layer(0), input, nullptr, g, cols, analog_current);
  auto rng = substream(options.input_seed, 0);  // rate input coding only

  std::vector<Mat<Scalar>> membrane(static_cast<std::size_t>(hidden));
  for (int l = 0; l < hidden; ++l)
    membrane[static_cast<std::size_t>(l)] = Mat<Scalar>::Constant(cfg.channels, g.pixels(), p.v_reset);
  Mat<Scalar> readout = Mat<Scalar>::Constant(1, g.pixels(), p.v_reset);
  rec.residual = Mat<Scalar>::Zero(1, g.pixels());

  for (std::size_t t = 0; t < T; ++t) {
    for (int l = 0; l < hidden; ++l) {
      const auto& layer = net.layer(l);
      if (l == 0 && cfg.coding == InputCoding::lif) {
        current = analog_current;
      } else if (l == 0) {
        Mat<Scalar> in_spikes(1, g.pixels());
        for (Eigen::Index i = 0; i < g.pixels(); ++i) {
          const double prob = std::clamp(static_cast<double>(input(0, i)), 0.0, 1.0);
          in_spikes(0, i) = uniform01(rng) < prob ? Scalar(1) : Scalar(0);
        }
        if (binary) rec.input_events.push_back(SpikeList::from(in_spikes));
        detail::convolve(layer, in_spikes, binary ? &rec.input_events.back() : nullptr, g, cols, current);
        rec.input_spikes.push_back(std::move(in_spikes));
      } else {
        const auto below = static_cast<std::size_t>(l - 1);
        detail::convolve(layer, rec.spikes[below][t], binary ? &rec.events[below][t] : nullptr, g, cols, current);
      }
      auto& v = membrane[static_cast<std::size_t>(l)];
      Mat<Scalar> u = (leak * v.array() + gain * (current.array() + p.v_reset)).matrix();
      // Hard reset; the reset mask is always the Heaviside of the potential.
      v = (u.array() >= p.v_th).select(Mat<Scalar>::Constant(u.rows(), u.cols(), p.v_reset), u);
      const auto idx = static_cast<std::size_t>(l);
      rec.spikes[idx].push_back(detail::emit_all(u, options.mode, options.surrogate, p));
      if (binary) rec.events[idx].push_back(SpikeList::from(rec.spikes[idx].back()));
      rec.potential[idx].push_back(std::move(u));
    }
    const auto last = static_cast<std::size_t>(hidden - 1);
    detail::convolve(net.layer(cfg.depth - 1), rec.spikes[last][t], binary ? &rec.events[last][t] : nullptr, g, cols,
                     current);
    readout = (leak * readout.array() + gain * (current.array() + p.v_reset)).matrix();
    rec.residual += readout;
  }
  rec.residual /= Scalar(T);
  return rec;
}

/// Mean squared error over all entries and its gradient with respect to the residual.
template <typename Scalar>
Scalar loss_residual_mse(const Mat<Scalar>& residual, const Mat<Scalar>& target, Mat<Scalar>* grad = nullptr) {
  if (residual.rows() != target.rows() || residual.cols() != target.cols())
    throw std::invalid_argument("loss_residual_mse: shape mismatch");
  if (residual.size() == 0) throw std::invalid_argument("loss_residual_mse: empty input");
  const Mat<Scalar> diff = residual - target;
  if (grad) *grad = diff * (Scalar(2) / Scalar(diff.size()));
  return diff.squaredNorm() / Scalar(diff.size());
}

/// Backpropagation through time of dL/dR through the recorded forward pass.
///
/// The spike nonlinearity contributes surrogate_derivative; the reset mask
/// is treated as a constant, so no gradient flows through the reset.
template <typename Scalar>
Gradients<Scalar> backward_bptt(const SpikingNetwork<Scalar>& net, const ForwardRecord<Scalar>& rec,
                                const Mat<Scalar>& grad_residual) {
  const auto& cfg = net.config();
  const BatchGeometry& g = rec.geometry;
  const std::size_t T = cfg.t_count;
  const int hidden = cfg.spiking_layers();
  if (rec.t_count() != T || static_cast<int>(rec.potential.size()) != hidden)
    throw std::invalid_argument("backward_bptt: missing or mismatched forward record");
  if (grad_residual.rows() != 1 || grad_residual.cols() != g.pixels())
    throw std::invalid_argument("backward_bptt: gradient shape mismatch");

  const auto p = net.lif();
  const Scalar leak = p.leak(), gain = p.gain();
  const int k = cfg.kernel;
  auto grads = Gradients<Scalar>::zeros_like(net);

  const bool binary = rec.mode == SpikeMode::binary;
  auto events_of = [&](int layer, std::size_t t) -> const SpikeList* {
    return binary ? &rec.events[static_cast<std::size_t>(layer)][t] : nullptr;
  };

  Mat<Scalar> cols, dcols;
  // dL/d(spikes of the layer below), per step.
  std::vector<Mat<Scalar>> grad_spikes(T, Mat<Scalar>::Zero(cfg.channels, g.pixels()));

  {  // readout
    const int l = cfg.depth - 1;
    const auto& layer = net.layer(l);
    Mat<Scalar> d_membrane = Mat<Scalar>::Zero(1, g.pixels());
    const Mat<Scalar> per_step = grad_residual / Scalar(T);
    for (std::size_t t = T; t-- > 0;) {
      d_membrane = per_step + leak * d_membrane;
      const Mat<Scalar> d_current = gain * d_membrane;
      detail::accumulate_weight_grad(d_current, spike_record(rec, hidden - 1, t), events_of(hidden - 1, t), g, k, cols,
                                     grads.weights[static_cast<std::size_t>(l)]);
      grads.bias[static_cast<std::size_t>(l)] += d_current.rowwise().sum().transpose();
      dcols.noalias() = layer.weights.transpose() * d_current;
      col2im_add(dcols, g, k, grad_spikes[t]);
    }
  }

  Mat<Scalar> analog_grad, d_u, d_current;
  for (int l = hidden - 1; l >= 0; --l) {
    const auto& layer = net.layer(l);
    const auto idx = static_cast<std::size_t>(l);
    const auto& potentials = rec.potential[idx];
    std::vector<Mat<Scalar>> below;
    if (l > 0) below.assign(T, Mat<Scalar>::Zero(cfg.channels, g.pixels()));
    Mat<Scalar> d_membrane = Mat<Scalar>::Zero(cfg.channels, g.pixels());
    const bool analog = l == 0 && cfg.coding == InputCoding::lif;
    if (analog) analog_grad = Mat<Scalar>::Zero(cfg.channels, g.pixels());

    for (std::size_t t = T; t-- > 0;) {
      const auto& u = potentials[t];
      d_u = u.binaryExpr(grad_spikes[t], [&](Scalar v, Scalar ds) { return ds * surrogate_derivative(v, rec.surrogate, p); });
      d_u.array() += d_membrane.array() * (u.array() < p.v_th).template cast<Scalar>();
      d_membrane = leak * d_u;
      d_current = gain * d_u;

      if (analog) {
        analog_grad += d_current;
        continue;
      }
      grads.bias[idx] += d_current.rowwise().sum().transpose();
      if (l == 0) {
        const SpikeList* ev = binary ? &rec.input_events.at(t) : nullptr;
        detail::accumulate_weight_grad(d_current, rec.input_spikes.at(t), ev, g, k, cols, grads.weights[idx]);
      } else {
        detail::accumulate_weight_grad(d_current, spike_record(rec, l - 1, t), events_of(l - 1, t), g, k, cols,
                                       grads.weights[idx]);
        dcols.noalias() = layer.weights.transpose() * d_current;
        col2im_add(dcols, g, k, below[t]);
      }
    }
    if (analog) {
      im2col(rec.input, g, k, cols);
      grads.weights[0].noalias() += analog_grad * cols.transpose();
      grads.bias[0] += analog_grad.rowwise().sum().transpose();
    }
    grad_spikes = std::move(below);
  }
  return grads;
}

}  // namespace spikecode
