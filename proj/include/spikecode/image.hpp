#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace spikecode {

using PixelArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Grayscale image with its declared value range.
struct ImageGray {
  PixelArray pixels;  // height x width
  double lo = 0.0;
  double hi = 255.0;

  ImageGray() = default;
  ImageGray(PixelArray p, double range_lo, double range_hi) : pixels(std::move(p)), lo(range_lo), hi(range_hi) {}
  static ImageGray constant(Eigen::Index height, Eigen::Index width, double value, double range_lo = 0.0,
                            double range_hi = 255.0) {
    return {PixelArray::Constant(height, width, value), range_lo, range_hi};
  }

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index size() const { return pixels.size(); }
  bool same_shape(const ImageGray& o) const { return width() == o.width() && height() == o.height(); }
};

/// Reads an 8-bit grayscale PGM (P5) or PNG; the format is picked from the
/// file signature. Throws IoError for malformed or unsupported files.
ImageGray load_image(const std::filesystem::path& path);

/// Writes PNG when the extension is .png, PGM (P5) otherwise. Values are
/// mapped from the image range to [0, 255], rounded and clipped.
void save_image(const ImageGray& img, const std::filesystem::path& path);

/// The image exactly as save_image would store it, back on the 0-255 range.
ImageGray quantize_8bit(const ImageGray& img);

ImageGray read_pgm(std::istream& in);
void write_pgm(const ImageGray& img, std::ostream& out);

/// Every regular .pgm/.png file in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Affine map of [img.lo, img.hi] onto [lo, hi]. Mapping back to the
/// original range inverts it.
ImageGray normalize_range(const ImageGray& img, double lo, double hi);

struct NoiseSpec {
  double sigma = 0.0;  // on the 0-255 scale
  std::uint64_t seed = 0;
};

/// y = x + v with v ~ N(0, sigma^2) i.i.d. per pixel. No clipping.
ImageGray add_awgn(const ImageGray& img, const NoiseSpec& spec);

double mse(const ImageGray& ref, const ImageGray& test);

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const ImageGray& ref, const ImageGray& test, double peak = 255.0);
double psnr_from_mse(double mse, double peak);

struct PatchSpec {
  int size = 40;
  int stride = 10;
};

/// Square patches on a regular grid, row-major order. With `augment_seed`
/// each patch gets one of the eight flip/rotation variants.
std::vector<ImageGray> extract_patches(const ImageGray& img, const PatchSpec& spec,
                                       std::optional<std::uint64_t> augment_seed = std::nullopt);

/// Applies dihedral transform `code` in [0, 8): bit 2 transposes, bit 1
/// flips rows, bit 0 flips columns.
PixelArray dihedral(const PixelArray& a, int code);

}  // namespace spikecode
