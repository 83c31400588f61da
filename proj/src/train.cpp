#include "spikecode/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "spikecode/csv.hpp"
#include "spikecode/errors.hpp"

namespace spikecode {

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("TrainConfig: sigma must be > 0");
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (patch_size < 1 || patch_stride < 1) throw std::invalid_argument("TrainConfig: bad patch geometry");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("TrainConfig: lr_decay must be > 0");
  surrogate.validate();
}

std::vector<ImageGray> make_training_patches(const std::vector<ImageGray>& images, const TrainConfig& cfg) {
  std::vector<ImageGray> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto img = normalize_range(images[i], 0.0, 255.0);
    auto patches = extract_patches(img, {cfg.patch_size, cfg.patch_stride}, cfg.seed * 1000003u + i);
    std::move(patches.begin(), patches.end(), std::back_inserter(out));
  }
  return out;
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kNoiseStream = 0x4e4f;
constexpr std::uint64_t kInputStream = 0x494e;

std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) { return seed ^ (tag * 0x9e3779b97f4a7c15ULL); }

class Optimizer {
 public:
  Optimizer(const TrainNet& net, const TrainConfig& cfg) : cfg_(cfg) {
    velocity_ = Gradients<float>::zeros_like(net);
    second_ = Gradients<float>::zeros_like(net);
  }

  void step(TrainNet& net, const Gradients<float>& g, double lr) {
    ++steps_;
    const float rate = static_cast<float>(lr);
    const float mom = static_cast<float>(cfg_.momentum);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      if (cfg_.optimizer == OptimizerKind::sgd) {
        velocity_.weights[l] = mom * velocity_.weights[l] + g.weights[l];
        velocity_.bias[l] = mom * velocity_.bias[l] + g.bias[l];
        layer.weights -= rate * velocity_.weights[l];
        layer.bias -= rate * velocity_.bias[l];
      } else {
        adam(layer.weights, velocity_.weights[l], second_.weights[l], g.weights[l], rate);
        adam(layer.bias, velocity_.bias[l], second_.bias[l], g.bias[l], rate);
      }
    }
  }

 private:
  template <typename M>
  void adam(M& param, M& m, M& v, const M& g, float lr) const {
    const float b1 = static_cast<float>(cfg_.momentum), b2 = 0.999f, eps = 1e-8f;
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    const float c1 = 1.0f - std::pow(b1, static_cast<float>(steps_));
    const float c2 = 1.0f - std::pow(b2, static_cast<float>(steps_));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

  TrainConfig cfg_;
  Gradients<float> velocity_, second_;
  long steps_ = 0;
};

double scheduled_lr(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (double m : cfg.lr_milestones)
    if (epoch >= static_cast<int>(std::floor(m * cfg.epochs))) lr *= cfg.lr_decay;
  return lr;
}

std::vector<double> layer_theta(const TrainNet& net, const ForwardRecord<float>& rec) {
  std::vector<double> theta;
  const double neurons = static_cast<double>(net.config().channels) * static_cast<double>(rec.geometry.pixels());
  for (int l = 0; l < net.config().spiking_layers(); ++l) {
    double spikes = 0.0;
    for (std::size_t t = 0; t < rec.t_count(); ++t) spikes += spike_record(rec, l, t).sum();
    theta.push_back(spikes / neurons);
  }
  return theta;
}

}  // namespace

TrainResult train(const TrainData& data, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  return train_from(TrainNet::initialized(net_cfg, cfg.seed, cfg.init_gain), data, cfg, on_epoch);
}

TrainResult train_from(TrainNet net, const TrainData& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.patches.empty()) throw std::invalid_argument("train: empty patch corpus");
  const auto h = data.patches.front().height(), w = data.patches.front().width();
  for (const auto& p : data.patches)
    if (p.height() != h || p.width() != w) throw std::invalid_argument("train: patches differ in size");
  if (data.validation_clean.has_value() != data.validation_noisy.has_value())
    throw std::invalid_argument("train: validation needs both clean and noisy images");

  const SurrogateSpec<float> surrogate = cfg.surrogate.cast<float>();
  const std::size_t n = data.patches.size();
  const Eigen::Index px = h * w;
  Optimizer opt(net, cfg);
  TrainResult result;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = substream(mix(cfg.seed, kShuffleStream), static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = scheduled_lr(cfg, epoch);

    double loss_sum = 0.0;
    std::vector<double> theta_sum(static_cast<std::size_t>(net.config().spiking_layers()), 0.0);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t count = std::min(n - start, static_cast<std::size_t>(cfg.batch));
      const BatchGeometry g{static_cast<Eigen::Index>(count), h, w};
      Mat<float> input(1, g.pixels()), target(1, g.pixels());
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = order[start + b];
        auto noise_rng = substream(mix(cfg.seed, kNoiseStream), (static_cast<std::uint64_t>(epoch) << 32) | idx);
        std::normal_distribution<double> noise(0.0, cfg.sigma);
        const auto& clean = data.patches[idx].pixels;
        for (Eigen::Index i = 0; i < px; ++i) {
          const double v = noise(noise_rng);
          const auto col = static_cast<Eigen::Index>(b) * px + i;
          input(0, col) = static_cast<float>((clean.data()[i] + v) / 255.0);
          target(0, col) = static_cast<float>(v / 255.0);
        }
      }
      ForwardOptions<float> fo;
      fo.surrogate = surrogate;
      fo.input_seed = mix(cfg.seed, kInputStream) + (static_cast<std::uint64_t>(epoch) << 32) + batches;
      const auto rec = forward(net, input, g, fo);
      Mat<float> grad;
      const double loss = loss_residual_mse(rec.residual, target, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged: loss " << loss << " at epoch " << epoch << ", batch " << batches;
        throw DivergenceError(msg.str());
      }
      const auto grads = backward_bptt(net, rec, grad);
      opt.step(net, grads, lr);

      loss_sum += loss * static_cast<double>(count);
      const auto theta = layer_theta(net, rec);
      for (std::size_t l = 0; l < theta.size(); ++l) theta_sum[l] += theta[l] * static_cast<double>(count);
      ++batches;
    }
    if (!net.all_finite())
      throw DivergenceError("training diverged: non-finite weights after epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(n);
    for (double t : theta_sum) entry.theta_layers.push_back(t / static_cast<double>(n));
    entry.val_psnr = std::numeric_limits<double>::quiet_NaN();
    if (data.validation_clean) {
      const auto den = denoise_image(net, *data.validation_noisy);
      entry.val_psnr = psnr(*data.validation_clean, den.denoised);
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry, net);
  }
  result.net = std::move(net);
  return result;
}

DenoiseResult denoise_image(const TrainNet& net, const ImageGray& noisy, const DenoiseOptions& options) {
  if (!net.all_finite()) throw std::invalid_argument("denoise_image: network has non-finite weights");
  if (options.tile < 1 || options.overlap < 0 || options.overlap >= options.tile)
    throw std::invalid_argument("denoise_image: bad tiling");
  if (noisy.size() == 0) throw std::invalid_argument("denoise_image: empty image");
  const ImageGray y = normalize_range(noisy, 0.0, 255.0);
  const Eigen::Index H = y.height(), W = y.width();

  auto starts = [&](Eigen::Index extent) {
    std::vector<Eigen::Index> s;
    const Eigen::Index size = std::min<Eigen::Index>(options.tile, extent);
    const Eigen::Index step = std::max<Eigen::Index>(1, size - options.overlap);
    for (Eigen::Index p = 0;; p += step) {
      if (p + size >= extent) {
        s.push_back(extent - size);
        break;
      }
      s.push_back(p);
    }
    return std::pair{s, size};
  };
  const auto [row_starts, th] = starts(H);
  const auto [col_starts, tw] = starts(W);

  PixelArray residual = PixelArray::Zero(H, W), weight = PixelArray::Zero(H, W);
  std::vector<double> theta(static_cast<std::size_t>(net.config().spiking_layers()), 0.0);
  double theta_weight = 0.0;
  std::uint64_t tile_index = 0;
  for (auto r0 : row_starts) {
    for (auto c0 : col_starts) {
      const BatchGeometry g{1, th, tw};
      Mat<float> input(1, g.pixels());
      for (Eigen::Index r = 0; r < th; ++r)
        for (Eigen::Index c = 0; c < tw; ++c) input(0, r * tw + c) = static_cast<float>(y.pixels(r0 + r, c0 + c) / 255.0);
      ForwardOptions<float> fo;
      fo.input_seed = options.input_seed + tile_index++;
      const auto rec = forward(net, input, g, fo);
      for (Eigen::Index r = 0; r < th; ++r)
        for (Eigen::Index c = 0; c < tw; ++c) {
          residual(r0 + r, c0 + c) += 255.0 * static_cast<double>(rec.residual(0, r * tw + c));
          weight(r0 + r, c0 + c) += 1.0;
        }
      const auto t = layer_theta(net, rec);
      for (std::size_t l = 0; l < t.size(); ++l) theta[l] += t[l] * static_cast<double>(g.pixels());
      theta_weight += static_cast<double>(g.pixels());
    }
  }
  residual /= weight;
  for (double& t : theta) t /= theta_weight;
  DenoiseResult out;
  out.residual = ImageGray(residual, 0.0, 255.0);
  out.denoised = ImageGray(y.pixels - residual, 0.0, 255.0);
  out.theta_layers = std::move(theta);
  return out;
}

void write_train_log_csv(const std::vector<EpochLog>& log, std::ostream& out) {
  std::size_t layers = log.empty() ? 0 : log.front().theta_layers.size();
  out << "epoch,loss,val_psnr";
  for (std::size_t l = 1; l <= layers; ++l) out << ",theta_layer_" << l;
  out << '\n';
  for (const auto& e : log) {
    out << e.epoch << ',' << csv_number(e.loss) << ',' << csv_number(e.val_psnr);
    for (double t : e.theta_layers) out << ',' << csv_number(t);
    out << '\n';
  }
}

}  // namespace spikecode
