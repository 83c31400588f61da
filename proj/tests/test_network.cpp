#include <doctest.h>

#include <cmath>
#include <random>

#include "spikecode/gradcheck.hpp"
#include "spikecode/network.hpp"

using namespace spikecode;

namespace {

NetworkConfig small_config(int depth, std::size_t T, InputCoding coding = InputCoding::lif, int channels = 4) {
  NetworkConfig c;
  c.depth = depth;
  c.channels = channels;
  c.kernel = 3;
  c.t_count = T;
  c.coding = coding;
  return c;
}

Mat<double> random_map(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

SpikingNetwork<double> random_net(const NetworkConfig& cfg, std::uint64_t seed) {
  auto net = SpikingNetwork<double>::initialized(cfg, seed, 3.0);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = d(rng);
  }
  auto& out = net.layers().back();
  for (Eigen::Index i = 0; i < out.weights.size(); ++i) out.weights.data()[i] = d(rng);
  return net;
}

}  // namespace

TEST_CASE("NetworkConfig validation") {
  CHECK_NOTHROW(NetworkConfig{}.validate());
  auto c = small_config(1, 3);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(2, 3);
  c.kernel = 4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(2, 0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(2, 3);
  c.lif.tau = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_input_coding("rate") == InputCoding::rate);
  CHECK_THROWS_AS(parse_input_coding("poisson"), std::invalid_argument);
  CHECK(parse_readout(to_string(Readout::membrane_mean)) == Readout::membrane_mean);
}

TEST_CASE("layer shapes follow the config") {
  SpikingNetwork<double> net(small_config(4, 3, InputCoding::lif, 6));
  REQUIRE(net.layers().size() == 4);
  CHECK(net.layer(0).weights.rows() == 6);
  CHECK(net.layer(0).weights.cols() == 9);
  CHECK(net.layer(1).weights.cols() == 54);
  CHECK(net.layer(3).weights.rows() == 1);
  CHECK(net.parameter_count() == (6 * 9 + 6) + 2 * (6 * 54 + 6) + (54 + 1));
}

TEST_CASE("initialisation leaves the readout at zero and bounds the spiking weights") {
  const auto cfg = small_config(3, 4, InputCoding::lif, 8);
  const auto net = SpikingNetwork<double>::initialized(cfg, 5, 3.0);
  CHECK(net.layers().back().weights.isZero(0.0));
  for (int l = 0; l < 2; ++l) {
    const double bound = 3.0 * std::sqrt(6.0 / static_cast<double>(net.layer(l).fan_in()));
    CHECK(net.layer(l).weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.layer(l).weights.cwiseAbs().maxCoeff() > 0.5 * bound);
  }
  const auto again = SpikingNetwork<double>::initialized(cfg, 5, 3.0);
  CHECK(again.layer(1).weights == net.layer(1).weights);
}

TEST_CASE("all-zero weights give a zero residual") {
  for (auto coding : {InputCoding::lif, InputCoding::rate}) {
    SpikingNetwork<double> net(small_config(3, 5, coding));
    const BatchGeometry g{2, 6, 7};
    const auto rec = forward(net, random_map(1, g.pixels(), 1), g);
    CHECK(rec.residual.isZero(0.0));
  }
}

TEST_CASE("spike records are binary and shaped T x C x H x W") {
  const auto cfg = small_config(4, 6, InputCoding::lif, 5);
  const auto net = random_net(cfg, 9);
  const BatchGeometry g{3, 5, 4};
  const auto rec = forward(net, random_map(1, g.pixels(), 2), g);
  CHECK(rec.residual.rows() == 1);
  CHECK(rec.residual.cols() == g.pixels());
  REQUIRE(rec.potential.size() == 3);
  double total = 0.0;
  for (int l = 0; l < 3; ++l) {
    REQUIRE(rec.potential[static_cast<std::size_t>(l)].size() == 6);
    for (std::size_t t = 0; t < 6; ++t) {
      const auto s = spike_record(rec, l, t);
      CHECK(s.rows() == 5);
      CHECK(s.cols() == g.pixels());
      CHECK((s.array() * (1.0 - s.array())).isZero(0.0));
      total += s.sum();
    }
  }
  CHECK(total > 0.0);
}

TEST_CASE("depth 2, T = 1 with silent hidden neurons reduces to the bias map") {
  // One readout step from v_reset = 0: M = (1/tau) * b.
  auto cfg = small_config(2, 1);
  SpikingNetwork<double> net(cfg);
  net.layer(0).weights.setConstant(0.05);  // 9 * 0.05 * 1 / 2 < v_th
  net.layer(1).weights.setConstant(0.7);
  net.layer(1).bias[0] = 0.36;
  const BatchGeometry g{1, 8, 8};
  const auto rec = forward<double>(net, Mat<double>::Ones(1, g.pixels()), g);
  CHECK(spike_record(rec, 0, 0).isZero(0.0));
  for (Eigen::Index i = 0; i < g.pixels(); ++i) CHECK(rec.residual(0, i) == doctest::Approx(0.18).epsilon(1e-15));

  // With T steps the readout charges towards b: mean of b (1 - (1 - 1/tau)^t).
  cfg.t_count = 4;
  SpikingNetwork<double> longer(cfg);
  longer.layer(1).bias[0] = 0.36;
  const auto r4 = forward<double>(longer, Mat<double>::Ones(1, g.pixels()), g);
  const double expect = 0.36 * ((0.5 + 0.75 + 0.875 + 0.9375) / 4.0);
  CHECK(r4.residual(0, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("a single hidden spike reaches the readout through the kernel") {
  auto cfg = small_config(2, 1, InputCoding::lif, 1);
  SpikingNetwork<double> net(cfg);
  net.layer(0).at(0, 0, 1, 1) = 2.0;  // centre tap: U = 2 x / tau
  net.layer(1).at(0, 0, 1, 2) = 1.0;  // reads the right neighbour
  const BatchGeometry g{1, 3, 3};
  Mat<double> x = Mat<double>::Zero(1, 9);
  x(0, 4) = 1.5;  // centre fires, U = 1.5
  const auto rec = forward(net, x, g);
  CHECK(spike_record(rec, 0, 0).sum() == 1.0);
  // Pixel 3 (row 1, col 0) sees the spike at its right neighbour: R = 1 / tau.
  CHECK(rec.residual(0, 3) == 0.5);
  CHECK(rec.residual(0, 4) == 0.0);
  CHECK(rec.residual(0, 5) == 0.0);
}

TEST_CASE("forward rejects mismatched shapes") {
  SpikingNetwork<double> net(small_config(2, 2));
  const BatchGeometry g{1, 4, 4};
  CHECK_THROWS_AS(forward<double>(net, Mat<double>::Zero(1, 15), g), std::invalid_argument);
  CHECK_THROWS_AS(forward<double>(net, Mat<double>::Zero(2, 16), g), std::invalid_argument);
  const auto rec = forward<double>(net, Mat<double>::Zero(1, 16), g);
  CHECK_THROWS_AS(backward_bptt<double>(net, rec, Mat<double>::Zero(1, 9)), std::invalid_argument);
  SpikingNetwork<double> other(small_config(3, 2));
  CHECK_THROWS_AS(backward_bptt<double>(other, rec, Mat<double>::Zero(1, 16)), std::invalid_argument);
}

TEST_CASE("loss_residual_mse examples") {
  const auto v = random_map(1, 50, 3, -1.0, 1.0);
  CHECK(loss_residual_mse<double>(v, v) == 0.0);
  CHECK(loss_residual_mse<double>(Mat<double>::Zero(1, 50), Mat<double>::Constant(1, 50, 0.3)) ==
        doctest::Approx(0.09).epsilon(1e-15));

  const auto r = random_map(1, 50, 4, -1.0, 1.0);
  double ref = 0.0;
  for (int i = 0; i < 50; ++i) ref += (r(0, i) - v(0, i)) * (r(0, i) - v(0, i));
  ref /= 50.0;
  Mat<double> grad;
  CHECK(loss_residual_mse<double>(r, v, &grad) == doctest::Approx(ref).epsilon(1e-14));
  for (int i = 0; i < 50; ++i) CHECK(grad(0, i) == doctest::Approx(2.0 * (r(0, i) - v(0, i)) / 50.0));

  CHECK_THROWS_AS(loss_residual_mse<double>(r, Mat<double>::Zero(1, 49)), std::invalid_argument);
}

TEST_CASE("surrogate derivative examples") {
  const LifParams<double> p{};
  const SurrogateSpec<double> rect{SurrogateShape::rectangular, 1.0};
  CHECK(surrogate_derivative(1.4, rect, p) == 1.0);
  CHECK(surrogate_derivative(1.0, rect, p) == 1.0);
  CHECK(surrogate_derivative(1.6, rect, p) == 0.0);
  CHECK(surrogate_derivative(-5.0, rect, p) == 0.0);

  const SurrogateSpec<double> narrow{SurrogateShape::rectangular, 0.25};
  CHECK(surrogate_derivative(1.0, narrow, p) == 4.0);

  const SurrogateSpec<double> tri{SurrogateShape::triangular, 1.0};
  CHECK(surrogate_derivative(1.0, tri, p) == 2.0);
  CHECK(surrogate_derivative(1.25, tri, p) == 1.0);
  CHECK(surrogate_derivative(3.0, tri, p) == 0.0);

  const SurrogateSpec<double> fs{SurrogateShape::fast_sigmoid, 1.0};
  CHECK(surrogate_derivative(1.0, fs, p) == 1.0);
  CHECK(surrogate_derivative(1.5, fs, p) == 0.25);
  CHECK(surrogate_derivative(1001.0, fs, p) < 1e-6);

  CHECK(parse_surrogate_shape("fast-sigmoid") == SurrogateShape::fast_sigmoid);
  CHECK_THROWS_AS(parse_surrogate_shape("gaussian"), std::invalid_argument);
  CHECK_THROWS_AS((SurrogateSpec<double>{SurrogateShape::rectangular, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("property: surrogate shapes are non-negative, symmetric, peak at v_th and integrate their spike") {
  const LifParams<double> p{1.3, 2.0, 0.0};
  for (auto shape : {SurrogateShape::rectangular, SurrogateShape::triangular, SurrogateShape::fast_sigmoid}) {
    for (double w : {0.5, 1.0, 2.0}) {
      CAPTURE(to_string(shape));
      CAPTURE(w);
      const SurrogateSpec<double> s{shape, w};
      const double peak = surrogate_derivative(p.v_th, s, p);
      CHECK(surrogate_spike(p.v_th, s, p) == doctest::Approx(0.5));
      for (int i = 0; i <= 400; ++i) {
        const double u = -3.99 + 8.0 * i / 400.0;  // stays clear of the kinks
        const double d = surrogate_derivative(p.v_th + u, s, p);
        CHECK(d >= 0.0);
        CHECK(d <= peak);
        CHECK(d == doctest::Approx(surrogate_derivative(p.v_th - u, s, p)).epsilon(1e-12));
        const double lo = surrogate_spike(p.v_th + u, s, p);
        const double hi = surrogate_spike(p.v_th + u + 1e-6, s, p);
        CHECK(hi >= lo);
        // Slope of the spike is the derivative away from kinks.
        if (std::abs(std::abs(u) - w / 2) > 1e-3 && std::abs(u) > 1e-3)
          CHECK((hi - lo) / 1e-6 == doctest::Approx(d).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("BPTT matches central differences of the relaxed forward") {
  for (auto coding : {InputCoding::lif, InputCoding::rate}) {
    for (auto shape : {SurrogateShape::rectangular, SurrogateShape::triangular, SurrogateShape::fast_sigmoid}) {
      for (int depth : {2, 3}) {
        CAPTURE(to_string(coding));
        CAPTURE(to_string(shape));
        CAPTURE(depth);
        const auto cfg = small_config(depth, 3, coding, 8);
        const auto net = random_net(cfg, 17 + static_cast<std::uint64_t>(depth));
        const BatchGeometry g{1, 8, 8};
        const auto input = random_map(1, g.pixels(), 21, -0.1, 1.2);
        const auto target = random_map(1, g.pixels(), 22, -0.3, 0.3);
        ForwardOptions<double> fo;
        fo.surrogate = {shape, 1.0};
        fo.input_seed = 99;
        const auto samples = check_gradients(net, input, g, target, fo, {150, 1e-5, 1e-8, 7});
        REQUIRE(samples.size() == 150);
        int nonzero = 0;
        double worst = 0.0;
        for (const auto& s : samples) {
          worst = std::max(worst, s.relative_error);
          if (std::abs(s.analytic) > 1e-8) ++nonzero;
        }
        CHECK(worst < 1e-4);
        CHECK(nonzero > 100);
      }
    }
  }
}

TEST_CASE("zero-weight network with zero target has zero gradients") {
  SpikingNetwork<double> net(small_config(3, 4));
  const BatchGeometry g{1, 6, 6};
  const auto rec = forward(net, random_map(1, g.pixels(), 5), g);
  Mat<double> grad;
  loss_residual_mse<double>(rec.residual, Mat<double>::Zero(1, g.pixels()), &grad);
  const auto grads = backward_bptt(net, rec, grad);
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) CHECK(grads.flat(i) == 0.0);

  // A non-zero target only reaches the readout bias.
  loss_residual_mse<double>(rec.residual, Mat<double>::Constant(1, g.pixels(), 0.2), &grad);
  const auto g2 = backward_bptt(net, rec, grad);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(g2.weights[l].isZero(0.0));
    if (l < 2) CHECK(g2.bias[l].isZero(0.0));
  }
  CHECK(g2.bias[2][0] < 0.0);
}

TEST_CASE("gradients are invariant to translating an isolated input pattern") {
  auto cfg = small_config(3, 3);
  auto net = random_net(cfg, 31);
  for (auto& l : net.layers()) l.bias.setZero();  // a zero background stays silent
  const BatchGeometry g{1, 16, 16};
  auto place = [&](int oy, int ox, double scale) {
    Mat<double> m = Mat<double>::Zero(1, g.pixels());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(0.2, 1.0);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) m(0, (oy + y) * 16 + ox + x) = scale * d(rng);
    return m;
  };
  ForwardOptions<double> fo;
  fo.mode = SpikeMode::relaxed;
  auto grads_for = [&](int oy, int ox) {
    const auto in = place(oy, ox, 1.5);
    const auto target = place(oy, ox, 0.1);
    const auto rec = forward(net, in, g, fo);
    Mat<double> grad;
    loss_residual_mse(rec.residual, target, &grad);
    return backward_bptt(net, rec, grad);
  };
  const auto a = grads_for(4, 4);
  const auto b = grads_for(8, 7);
  double norm = 0.0;
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
    CHECK(a.flat(i) == doctest::Approx(b.flat(i)).epsilon(1e-10).scale(1e-12));
    norm += a.flat(i) * a.flat(i);
  }
  CHECK(norm > 0.0);
}

TEST_CASE("a constant input yields a constant residual away from the border") {
  const auto net = random_net(small_config(3, 5), 41);
  const BatchGeometry g{1, 14, 14};
  const auto rec = forward<double>(net, Mat<double>::Constant(1, g.pixels(), 0.6), g);
  const double centre = rec.residual(0, 7 * 14 + 7);
  for (int y = 3; y < 11; ++y)
    for (int x = 3; x < 11; ++x) CHECK(rec.residual(0, y * 14 + x) == doctest::Approx(centre).epsilon(1e-12));
}

TEST_CASE("forward is deterministic and rate coding depends only on the input seed") {
  const auto lif_net = random_net(small_config(3, 4), 51);
  const BatchGeometry g{2, 6, 6};
  const auto x = random_map(1, g.pixels(), 52);
  CHECK(forward(lif_net, x, g).residual == forward(lif_net, x, g).residual);

  const auto rate_net = random_net(small_config(3, 4, InputCoding::rate), 51);
  ForwardOptions<double> a, b;
  a.input_seed = 1;
  b.input_seed = 2;
  const auto ra = forward(rate_net, x, g, a);
  CHECK(ra.residual == forward(rate_net, x, g, a).residual);
  REQUIRE(ra.input_spikes.size() == 4);
  CHECK_FALSE(ra.input_spikes[0] == forward(rate_net, x, g, b).input_spikes[0]);
}

TEST_CASE("rate input spikes follow the clamped input") {
  const auto net = random_net(small_config(2, 64, InputCoding::rate), 61);
  const BatchGeometry g{1, 1, 3};
  Mat<double> x(1, 3);
  x << -0.5, 1.7, 0.5;
  const auto rec = forward(net, x, g);
  double mid = 0.0;
  for (const auto& s : rec.input_spikes) {
    CHECK(s(0, 0) == 0.0);
    CHECK(s(0, 1) == 1.0);
    mid += s(0, 2);
  }
  CHECK(mid > 16.0);
  CHECK(mid < 48.0);
}

TEST_CASE("float and double networks agree") {
  const auto net = random_net(small_config(3, 4), 71);
  const BatchGeometry g{1, 8, 8};
  const auto x = random_map(1, g.pixels(), 72);
  ForwardOptions<double> fo;
  fo.mode = SpikeMode::relaxed;
  ForwardOptions<float> ff;
  ff.mode = SpikeMode::relaxed;
  const auto rd = forward(net, x, g, fo);
  const auto rf = forward(net.cast<float>(), Mat<float>(x.cast<float>()), g, ff);
  CHECK((rd.residual - rf.residual.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("event convolution matches the dense patch-matrix product") {
  const BatchGeometry g{2, 7, 5};
  std::mt19937_64 rng(81);
  std::bernoulli_distribution fire(0.2);
  Mat<double> s(6, g.pixels());
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = fire(rng) ? 1.0 : 0.0;
  const auto w = random_map(3, 6 * 9, 82, -1.0, 1.0);
  Mat<double> cols;
  im2col(s, g, 3, cols);
  Mat<double> out = Mat<double>::Zero(3, g.pixels());
  const auto events = SpikeList::from(s);
  CHECK(events.channel.size() == static_cast<std::size_t>(s.sum()));
  conv_spikes_add(w, events, g, 3, out);
  CHECK((out - w * cols).cwiseAbs().maxCoeff() < 1e-12);

  const auto d = random_map(3, g.pixels(), 83, -1.0, 1.0);
  Mat<double> grad = Mat<double>::Zero(3, 6 * 9);
  conv_spikes_weight_grad(d, events, g, 3, grad);
  CHECK((grad - d * cols.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("binary-mode gradients agree with the dense path") {
  for (auto coding : {InputCoding::lif, InputCoding::rate}) {
    const auto net = random_net(small_config(3, 4, coding, 6), 91);
    const BatchGeometry g{2, 9, 9};
    ForwardOptions<double> fo;
    fo.input_seed = 5;
    const auto rec = forward(net, random_map(1, g.pixels(), 92), g, fo);
    REQUIRE(rec.events.size() == 2);
    Mat<double> grad;
    loss_residual_mse(rec.residual, random_map(1, g.pixels(), 93, -0.2, 0.2), &grad);
    auto dense = rec;  // without event lists the backward pass uses im2col
    dense.mode = SpikeMode::relaxed;
    const auto a = backward_bptt(net, rec, grad);
    const auto b = backward_bptt(net, dense, grad);
    for (Eigen::Index i = 0; i < net.parameter_count(); ++i)
      CHECK(a.flat(i) == doctest::Approx(b.flat(i)).epsilon(1e-12).scale(1e-12));
  }
}
