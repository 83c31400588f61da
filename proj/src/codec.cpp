#include "spikecode/codec.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "spikecode/csv.hpp"
#include "spikecode/parallel.hpp"
#include "spikecode/rate_coder.hpp"

namespace spikecode {

std::string_view to_string(Scheme s) { return s == Scheme::lif ? "lif" : "rate"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "lif") return Scheme::lif;
  if (s == "rate") return Scheme::rate;
  throw std::invalid_argument("unknown coding scheme '" + std::string(s) + "'");
}

std::pair<double, double> scheme_input_range(Scheme scheme, const CodecParams& params) {
  if (scheme == Scheme::lif) return {params.lif.v_th, params.lif.saturation_input()};
  return {0.0, 1.0};
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::uint64_t pixel_stream(std::uint64_t image_index, Eigen::Index pixel) {
  return (image_index << 32) | static_cast<std::uint64_t>(pixel);
}

EncodedImage encode_with_streams(const ImageGray& img, Scheme scheme, std::size_t t_count, const CodecParams& params,
                                 std::uint64_t image_index) {
  if (t_count < 1) throw std::invalid_argument("encode_decode_image: T must be >= 1");
  const auto [lo, hi] = scheme_input_range(scheme, params);
  if (!close(img.lo, lo) || !close(img.hi, hi))
    throw std::invalid_argument("encode_decode_image: image range does not match the " +
                                std::string(to_string(scheme)) + " input range");

  EncodedImage out{ImageGray::constant(img.height(), img.width(), 0.0, 0.0, 1.0),
                   SpikeTensor(t_count, img.height(), img.width())};
  const RateCoderConfig rate_cfg{params.seed, t_count};
  for (Eigen::Index r = 0; r < img.height(); ++r) {
    for (Eigen::Index c = 0; c < img.width(); ++c) {
      const double x = img.pixels(r, c);
      SpikeTrain train;
      if (scheme == Scheme::lif) {
        train = encode_lif(x, t_count, params.lif).spikes;
      } else {
        train = encode_poisson(std::clamp(x, 0.0, 1.0), rate_cfg, pixel_stream(image_index, r * img.width() + c));
      }
      for (std::size_t t = 0; t < t_count; ++t) out.spikes.set(t, r, c, train[t]);
      out.reconstruction.pixels(r, c) = decode_rate(train);
    }
  }
  return out;
}

}  // namespace

EncodedImage encode_decode_image(const ImageGray& img, Scheme scheme, std::size_t t_count, const CodecParams& params) {
  params.lif.validate();
  return encode_with_streams(img, scheme, t_count, params, 0);
}

double activity_theta(const SpikeTensor& spikes) {
  const auto neurons = static_cast<double>(spikes.rows() * spikes.cols());
  if (neurons == 0.0) return 0.0;
  return static_cast<double>(spikes.total_spikes()) / neurons;
}

std::vector<StaircasePoint> staircase_curve(const LifParams<double>& p, std::size_t t_count,
                                            const std::vector<double>& x_grid) {
  p.validate();
  if (!std::is_sorted(x_grid.begin(), x_grid.end()))
    throw std::invalid_argument("staircase_curve: x grid must be sorted");
  std::vector<StaircasePoint> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    auto train = encode_lif(x, t_count, p).spikes;
    const double fr = decode_rate(train);
    out.push_back({x, fr, std::move(train)});
  }
  return out;
}

SweepResult sweep_timesteps(const std::vector<ImageGray>& corpus, Scheme scheme, const SweepOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("sweep_timesteps: empty corpus");
  if (options.t_list.empty()) throw std::invalid_argument("sweep_timesteps: empty T list");
  options.params.lif.validate();
  const auto [lo, hi] = scheme_input_range(scheme, options.params);
  const std::size_t repeats = scheme == Scheme::rate ? std::max<std::size_t>(1, options.repeats) : 1;

  std::vector<ImageGray> inputs, references;
  double pixel_total = 0.0;
  for (const auto& img : corpus) {
    inputs.push_back(normalize_range(img, lo, hi));
    references.push_back(normalize_range(img, 0.0, 1.0));
    pixel_total += static_cast<double>(img.size());
  }

  SweepResult result;
  for (std::size_t t_count : options.t_list) {
    double psnr_acc = 0.0, theta_acc = 0.0;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      CodecParams params = options.params;
      params.seed = options.params.seed + rep;
      std::vector<double> sq_err(corpus.size()), spikes(corpus.size());
      parallel_for(corpus.size(), [&](std::size_t i) {
        const auto enc = encode_with_streams(inputs[i], scheme, t_count, params, i);
        sq_err[i] = (enc.reconstruction.pixels - references[i].pixels).square().sum();
        spikes[i] = static_cast<double>(enc.spikes.total_spikes());
      });
      double err = 0.0, count = 0.0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        err += sq_err[i];
        count += spikes[i];
      }
      psnr_acc += psnr_from_mse(err / pixel_total, 1.0);
      theta_acc += count / pixel_total;
    }
    result.rows.push_back(
        {scheme, t_count, psnr_acc / static_cast<double>(repeats), theta_acc / static_cast<double>(repeats)});
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "scheme,T,psnr_db,theta\n";
  for (const auto& row : result.rows)
    out << to_string(row.scheme) << ',' << row.t_count << ',' << csv_number(row.psnr_db) << ','
        << csv_number(row.theta) << '\n';
}

}  // namespace spikecode
