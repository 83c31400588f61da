#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "spikecode/checkpoint.hpp"
#include "spikecode/errors.hpp"
#include "spikecode/train.hpp"

using namespace spikecode;
namespace fs = std::filesystem;

namespace {

NetworkConfig tiny_net(InputCoding coding = InputCoding::lif) {
  NetworkConfig c;
  c.depth = 3;
  c.channels = 4;
  c.t_count = 3;
  c.coding = coding;
  return c;
}

ImageGray textured(Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 255.0);
  PixelArray a(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) a(y, x) = 0.5 * d(rng) + 60.0 * std::sin(0.3 * x) + 60.0;
  return {a.cwiseMax(0.0).cwiseMin(255.0), 0.0, 255.0};
}

TrainConfig quick_config() {
  TrainConfig t;
  t.epochs = 1;
  t.batch = 4;
  t.patch_size = 12;
  t.patch_stride = 6;
  t.seed = 3;
  return t;
}

TrainData quick_data(const TrainConfig& cfg) {
  TrainData d;
  d.patches = make_training_patches({textured(24, 24, 1), textured(24, 30, 2)}, cfg);
  return d;
}

bool same_bits(const TrainNet& a, const TrainNet& b) {
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    const auto& x = a.layers()[l];
    const auto& y = b.layers()[l];
    if (x.weights.size() != y.weights.size()) return false;
    if (std::memcmp(x.weights.data(), y.weights.data(), sizeof(float) * static_cast<std::size_t>(x.weights.size())))
      return false;
    if (std::memcmp(x.bias.data(), y.bias.data(), sizeof(float) * static_cast<std::size_t>(x.bias.size()))) return false;
  }
  return true;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("spikecode_train_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("TrainConfig validation") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig t;
  t.sigma = 0.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = {};
  t.batch = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = {};
  t.lr = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = {};
  t.momentum = 1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  CHECK(parse_optimizer("sgd") == OptimizerKind::sgd);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), std::invalid_argument);
}

TEST_CASE("make_training_patches covers every image on the grid") {
  TrainConfig t;
  t.patch_size = 40;
  t.patch_stride = 10;
  const auto patches = make_training_patches({textured(60, 60, 1), textured(50, 70, 2)}, t);
  CHECK(patches.size() == 9 + 2 * 4);
  for (const auto& p : patches) {
    CHECK(p.width() == 40);
    CHECK(p.height() == 40);
  }
}

TEST_CASE("one epoch at lr = 0 leaves the weights unchanged") {
  for (auto opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
    auto cfg = quick_config();
    cfg.lr = 0.0;
    cfg.optimizer = opt;
    const auto init = TrainNet::initialized(tiny_net(), cfg.seed, cfg.init_gain);
    const auto result = train(quick_data(cfg), tiny_net(), cfg);
    CHECK(same_bits(result.net, init));
    REQUIRE(result.log.size() == 1);
    CHECK(std::isfinite(result.log[0].loss));
  }
}

TEST_CASE("identical seeds give bit-identical training") {
  auto cfg = quick_config();
  cfg.epochs = 2;
  const auto data = quick_data(cfg);
  for (auto coding : {InputCoding::lif, InputCoding::rate}) {
    const auto a = train(data, tiny_net(coding), cfg);
    const auto b = train(data, tiny_net(coding), cfg);
    CHECK(std::memcmp(&a.log[0].loss, &b.log[0].loss, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.log[1].loss, &b.log[1].loss, sizeof(double)) == 0);
    CHECK(same_bits(a.net, b.net));
    auto other = cfg;
    other.seed = 4;
    CHECK(train(data, tiny_net(coding), other).log[0].loss != a.log[0].loss);
  }
}

TEST_CASE("training reduces the loss on a small corpus") {
  auto cfg = quick_config();
  cfg.epochs = 6;
  cfg.lr = 3e-3;
  const auto result = train(quick_data(cfg), tiny_net(), cfg);
  CHECK(result.log.back().loss < result.log.front().loss);
}

TEST_CASE("epoch log reports activity per spiking layer") {
  auto cfg = quick_config();
  const auto result = train(quick_data(cfg), tiny_net(), cfg);
  REQUIRE(result.log[0].theta_layers.size() == 2);
  for (double theta : result.log[0].theta_layers) {
    CHECK(theta >= 0.0);
    CHECK(theta <= 3.0);
  }
  CHECK(result.log[0].theta_layers[0] > 0.0);
  CHECK(std::isnan(result.log[0].val_psnr));

  std::ostringstream csv;
  write_train_log_csv(result.log, csv);
  CHECK(csv.str().rfind("epoch,loss,val_psnr,theta_layer_1,theta_layer_2\n0,", 0) == 0);
  CHECK(csv.str().find(",nan,") != std::string::npos);
}

TEST_CASE("validation PSNR is computed on the held-out pair") {
  auto cfg = quick_config();
  auto data = quick_data(cfg);
  data.validation_clean = textured(20, 20, 9);
  data.validation_noisy = add_awgn(*data.validation_clean, {25.0, 1});
  const auto result = train(data, tiny_net(), cfg);
  CHECK(std::isfinite(result.log[0].val_psnr));
  data.validation_noisy.reset();
  CHECK_THROWS_AS(train(data, tiny_net(), cfg), std::invalid_argument);
}

TEST_CASE("divergence is detected") {
  auto cfg = quick_config();
  const auto data = quick_data(cfg);

  auto poisoned = TrainNet::initialized(tiny_net(), 1, 3.0);
  poisoned.layers().back().bias[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(train_from(poisoned, data, cfg), DivergenceError);

  cfg.optimizer = OptimizerKind::sgd;
  cfg.lr = 1e30;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train(data, tiny_net(), cfg), DivergenceError);
}

TEST_CASE("train rejects an empty or ragged corpus") {
  const auto cfg = quick_config();
  CHECK_THROWS_AS(train(TrainData{}, tiny_net(), cfg), std::invalid_argument);
  TrainData ragged;
  ragged.patches = {textured(12, 12, 1), textured(12, 13, 2)};
  CHECK_THROWS_AS(train(ragged, tiny_net(), cfg), std::invalid_argument);
}

TEST_CASE("a zero-weight network returns its input") {
  const TrainNet zero(tiny_net());
  const auto noisy = add_awgn(textured(37, 29, 5), {25.0, 2});
  const auto out = denoise_image(zero, noisy, {16, 4, 0});
  CHECK((out.denoised.pixels - noisy.pixels).abs().maxCoeff() == 0.0);
  CHECK(out.residual.pixels.abs().maxCoeff() == 0.0);
}

TEST_CASE("residual identity: denoised + R(y) reconstructs y") {
  auto net = TrainNet::initialized(tiny_net(), 7, 3.0);
  net.layers().back().weights.setConstant(0.05f);
  net.layers().back().bias.setConstant(-0.01f);
  const auto noisy = add_awgn(textured(33, 41, 6), {25.0, 3});
  const auto out = denoise_image(net, noisy, {16, 4, 0});
  CHECK(out.residual.pixels.abs().maxCoeff() > 0.0);
  CHECK(((out.denoised.pixels + out.residual.pixels) - noisy.pixels).abs().maxCoeff() < 1e-9);
}

TEST_CASE("a single tile matches a direct forward pass") {
  auto net = TrainNet::initialized(tiny_net(), 8, 3.0);
  net.layers().back().weights.setConstant(0.02f);
  const auto img = textured(20, 24, 7);
  const auto out = denoise_image(net, img, {128, 16, 0});
  Mat<float> x(1, 20 * 24);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(0, i) = static_cast<float>(img.pixels.data()[i] / 255.0);
  const auto rec = forward(net, x, {1, 20, 24});
  for (Eigen::Index i = 0; i < x.size(); ++i)
    CHECK(out.residual.pixels.data()[i] == doctest::Approx(255.0 * rec.residual(0, i)).epsilon(1e-6));
}

TEST_CASE("tiles with enough overlap agree with a single tile away from their seams") {
  // Depth 3 with 3x3 kernels sees 3 pixels in each direction.
  auto net = TrainNet::initialized(tiny_net(), 9, 3.0);
  net.layers().back().weights.setConstant(0.02f);
  const auto img = textured(30, 30, 8);
  const auto whole = denoise_image(net, img, {64, 0, 0});
  const auto tiled = denoise_image(net, img, {18, 12, 0});
  // Tiles start at 0, 6 and 12. Pixels 9 and 20 sit at least 3 rows and
  // columns inside every tile that covers them, or on the image border.
  CHECK(tiled.residual.pixels.allFinite());
  for (int p : {9, 20})
    CHECK(tiled.residual.pixels(p, p) == doctest::Approx(whole.residual.pixels(p, p)).epsilon(1e-5));
  CHECK_THROWS_AS(denoise_image(net, img, {16, 16, 0}), std::invalid_argument);
}

TEST_CASE("denoise_image rejects non-finite networks") {
  auto net = TrainNet::initialized(tiny_net(), 1, 3.0);
  net.layers()[1].weights(0, 0) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(denoise_image(net, textured(8, 8, 1)), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  TempDir dir;
  auto net = TrainNet::initialized(tiny_net(InputCoding::rate), 11, 3.0);
  net.layers().back().weights.setRandom();
  net.layers()[0].bias.setRandom();
  const auto path = dir.path / "net.json";
  save_checkpoint(net, path, {{"sigma", "25"}});
  const auto loaded = load_checkpoint<float>(path);
  CHECK(same_bits(loaded.net, net));
  CHECK(loaded.net.config().coding == InputCoding::rate);
  CHECK(loaded.net.config().t_count == 3);
  CHECK(loaded.meta.at("sigma") == "25");

  SpikingNetwork<double> wide(tiny_net());
  wide.layers()[1].weights.setRandom();
  wide.layers()[1].weights(0, 0) = 0.1 + 1e-17;
  save_checkpoint(wide, path);
  const auto back = load_checkpoint<double>(path);
  CHECK(back.net.layers()[1].weights == wide.layers()[1].weights);
}

TEST_CASE("malformed checkpoints raise IoError") {
  TempDir dir;
  const auto path = dir.path / "bad.json";
  CHECK_THROWS_AS(load_checkpoint<float>(dir.path / "missing.json"), IoError);

  auto write = [&](const std::string& text) {
    std::ofstream(path) << text;
  };
  write("not json at all");
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);
  write(R"({"format": "other", "version": 1})");
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);

  const TrainNet net(tiny_net());
  save_checkpoint(net, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  in.close();

  std::string wrong_version = text;
  wrong_version.replace(wrong_version.find("\"version\": 1"), 12, "\"version\": 9");
  write(wrong_version);
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);

  std::string bad_depth = text;
  bad_depth.replace(bad_depth.find("\"depth\": 3"), 10, "\"depth\": 1");
  write(bad_depth);
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);

  std::string bad_shape = text;
  bad_shape.replace(bad_shape.find("\"channels\": 4"), 13, "\"channels\": 5");
  write(bad_shape);
  CHECK_THROWS_AS(load_checkpoint<float>(path), IoError);
}
