#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spikecode/image.hpp"
#include "spikecode/lif.hpp"

namespace spikecode {

enum class Scheme { lif, rate };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

/// T x rows x cols binary spike record, timestep-major.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  SpikeTensor(std::size_t t_count, Eigen::Index rows, Eigen::Index cols)
      : t_count_(t_count), rows_(rows), cols_(cols), bits_(t_count * static_cast<std::size_t>(rows * cols), 0) {}

  std::size_t t_count() const { return t_count_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::uint8_t at(std::size_t t, Eigen::Index r, Eigen::Index c) const { return bits_[index(t, r, c)]; }
  void set(std::size_t t, Eigen::Index r, Eigen::Index c, bool v) { bits_[index(t, r, c)] = v ? 1 : 0; }
  std::size_t total_spikes() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

 private:
  std::size_t index(std::size_t t, Eigen::Index r, Eigen::Index c) const {
    return (t * static_cast<std::size_t>(rows_) + static_cast<std::size_t>(r)) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }
  std::size_t t_count_ = 0;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct CodecParams {
  LifParams<double> lif{};
  std::uint64_t seed = 0;  // rate coding only
};

/// Input range a scheme expects: [v_th, v_th * tau] for LIF, [0, 1] for rate.
std::pair<double, double> scheme_input_range(Scheme scheme, const CodecParams& params);

struct EncodedImage {
  ImageGray reconstruction;  // decoded firing rates on [0, 1]
  SpikeTensor spikes;
};

/// Encodes every pixel independently over `t_count` steps and rate-decodes it.
/// `img` must already carry the scheme's input range.
EncodedImage encode_decode_image(const ImageGray& img, Scheme scheme, std::size_t t_count,
                                 const CodecParams& params);

/// Mean number of spikes per neuron over the window.
double activity_theta(const SpikeTensor& spikes);

struct StaircasePoint {
  double x;
  double firing_rate;
  SpikeTrain pattern;
};

std::vector<StaircasePoint> staircase_curve(const LifParams<double>& p, std::size_t t_count,
                                            const std::vector<double>& x_grid);

struct SweepRow {
  Scheme scheme;
  std::size_t t_count;
  double psnr_db;
  double theta;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepOptions {
  std::vector<std::size_t> t_list{1, 2, 4, 8, 16, 32, 64};
  CodecParams params{};
  std::size_t repeats = 1;  // independent seeds averaged for rate coding
};

/// Coding fidelity and activity against T over a corpus.
///
/// Each image is mapped from its declared range onto the scheme's input
/// range and encoded. PSNR (peak 1) compares the decoded rates with the
/// image mapped onto [0, 1] and pools the squared error over all pixels of
/// the corpus. Rate-coding rows average PSNR and theta over `repeats` seeds.
SweepResult sweep_timesteps(const std::vector<ImageGray>& corpus, Scheme scheme, const SweepOptions& options);

/// Header `scheme,T,psnr_db,theta`.
void write_sweep_csv(const SweepResult& result, std::ostream& out);

}  // namespace spikecode
