#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spikecode/image.hpp"
#include "spikecode/network.hpp"

namespace spikecode {

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  double sigma = 25.0;  // on the 0-255 scale
  double lr = 1e-3;
  int epochs = 30;
  int batch = 16;
  std::uint64_t seed = 1;
  int patch_size = 40;
  int patch_stride = 10;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;  // SGD momentum, Adam beta1
  /// Step decay: the rate is multiplied by `lr_decay` after each fraction of
  /// the epochs listed here.
  std::vector<double> lr_milestones{0.6, 0.85};
  double lr_decay = 0.1;
  double init_gain = 3.0;
  SurrogateSpec<double> surrogate{};

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_psnr = 0.0;              // NaN without a validation image
  std::vector<double> theta_layers;  // mean spikes per neuron, per spiking layer
};

using TrainNet = SpikingNetwork<float>;

/// Training pairs are built from clean patches on the 0-255 scale: each epoch
/// draws fresh noise, scales y and v by 1/255 and regresses R(y) onto v.
struct TrainData {
  std::vector<ImageGray> patches;
  std::optional<ImageGray> validation_clean;
  std::optional<ImageGray> validation_noisy;
};

/// Grid patches with seeded flip/rotation augmentation from every image.
std::vector<ImageGray> make_training_patches(const std::vector<ImageGray>& images, const TrainConfig& cfg);

struct TrainResult {
  TrainNet net;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&, const TrainNet&)>;

/// Minibatch training with BPTT. Deterministic given the seeds. Throws
/// DivergenceError on a non-finite loss or weights.
TrainResult train(const TrainData& data, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Same, starting from `initial`.
TrainResult train_from(TrainNet initial, const TrainData& data, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

struct DenoiseOptions {
  int tile = 128;         // tiles of at most tile x tile pixels
  int overlap = 16;       // shared border between neighbouring tiles
  std::uint64_t input_seed = 0;  // rate input coding only
};

struct DenoiseResult {
  ImageGray denoised;  // y - R(y), unclipped, 0-255 scale
  ImageGray residual;  // R(y), 0-255 scale
  std::vector<double> theta_layers;
};

/// Full-image inference, tiled with averaging over overlaps.
DenoiseResult denoise_image(const TrainNet& net, const ImageGray& noisy, const DenoiseOptions& options = {});

/// Writes `epoch,loss,val_psnr,theta_layer_1..N`.
void write_train_log_csv(const std::vector<EpochLog>& log, std::ostream& out);

}  // namespace spikecode
