#include "spikecode/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "spikecode/errors.hpp"

namespace spikecode {
namespace fs = std::filesystem;

namespace {

// Next header token of a PNM file; skips whitespace and '#' comments.
bool pnm_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') in.unget();
  return !tok.empty() && c != EOF;
}

int pnm_int(std::istream& in) {
  std::string tok;
  if (!pnm_token(in, tok)) throw IoError("malformed PGM: truncated header");
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) ||
      tok.size() > 9)
    throw IoError("malformed PGM: bad header field '" + tok + "'");
  return std::stoi(tok);
}

std::vector<std::uint8_t> to_bytes(const ImageGray& img) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.size()));
  const double scale = img.hi > img.lo ? 255.0 / (img.hi - img.lo) : 1.0;
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const double v = (img.pixels.data()[i] - img.lo) * scale;
    bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return bytes;
}

ImageGray from_bytes(const std::vector<std::uint8_t>& bytes, int width, int height) {
  PixelArray a(height, width);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = bytes[static_cast<std::size_t>(i)];
  return {std::move(a), 0.0, 255.0};
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw IoError(std::string("PNG error: ") + msg);
}
void png_warn(png_structp, png_const_charp) {}

ImageGray read_png(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("PNG: out of memory");
  }
  try {
    png_init_io(png, f.get());
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) throw IoError("PNG: only grayscale images are supported");
    if (depth != 8) throw IoError("PNG: unsupported bit depth " + std::to_string(depth));
    if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
    png_read_update_info(png, info);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = bytes.data() + static_cast<std::size_t>(r) * width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_bytes(bytes, static_cast<int>(width), static_cast<int>(height));
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
}

void write_png(const ImageGray& img, const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("PNG: out of memory");
  }
  try {
    auto bytes = to_bytes(img);
    const auto width = static_cast<png_uint_32>(img.width());
    const auto height = static_cast<png_uint_32>(img.height());
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (png_uint_32 r = 0; r < height; ++r) png_write_row(png, bytes.data() + static_cast<std::size_t>(r) * width);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
}

}  // namespace

ImageGray read_pgm(std::istream& in) {
  std::string magic;
  if (!pnm_token(in, magic) || magic != "P5") throw IoError("malformed PGM: expected P5 magic");
  const int width = pnm_int(in);
  const int height = pnm_int(in);
  const int maxval = pnm_int(in);
  if (width <= 0 || height <= 0) throw IoError("malformed PGM: non-positive dimensions");
  if (maxval != 255) throw IoError("PGM: unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("malformed PGM: truncated pixel data");
  return from_bytes(bytes, width, height);
}

void write_pgm(const ImageGray& img, std::ostream& out) {
  const auto bytes = to_bytes(img);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing PGM data");
}

ImageGray load_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char sig[8] = {};
  in.read(sig, 8);
  const auto got = in.gcount();
  static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && std::equal(sig, sig + 8, reinterpret_cast<const char*>(png_sig))) {
    in.close();
    return read_png(path);
  }
  in.clear();
  in.seekg(0);
  return read_pgm(in);
}

ImageGray quantize_8bit(const ImageGray& img) {
  return from_bytes(to_bytes(img), static_cast<int>(img.width()), static_cast<int>(img.height()));
}

void save_image(const ImageGray& img, const fs::path& path) {
  if (img.size() == 0) throw std::invalid_argument("save_image: empty image");
  if (path.extension() == ".png") {
    write_png(img, path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pgm(img, out);
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ImageGray normalize_range(const ImageGray& img, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("normalize_range: hi must exceed lo");
  if (!(img.hi > img.lo)) throw std::invalid_argument("normalize_range: image range is degenerate");
  const double scale = (hi - lo) / (img.hi - img.lo);
  return {(img.pixels - img.lo) * scale + lo, lo, hi};
}

ImageGray add_awgn(const ImageGray& img, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw std::invalid_argument("add_awgn: sigma must be >= 0");
  ImageGray out = img;
  if (spec.sigma == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.pixels.data()[i] += noise(rng);
  return out;
}

double mse(const ImageGray& ref, const ImageGray& test) {
  if (!ref.same_shape(test)) throw std::invalid_argument("mse: image dimensions differ");
  if (ref.size() == 0) throw std::invalid_argument("mse: empty image");
  return (ref.pixels - test.pixels).square().mean();
}

double psnr_from_mse(double m, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double psnr(const ImageGray& ref, const ImageGray& test, double peak) { return psnr_from_mse(mse(ref, test), peak); }

PixelArray dihedral(const PixelArray& a, int code) {
  PixelArray out = a;
  if (code & 4) out = PixelArray(out.transpose());
  if (code & 2) out = PixelArray(out.colwise().reverse());
  if (code & 1) out = PixelArray(out.rowwise().reverse());
  return out;
}

std::vector<ImageGray> extract_patches(const ImageGray& img, const PatchSpec& spec,
                                       std::optional<std::uint64_t> augment_seed) {
  if (spec.size < 1 || spec.stride < 1) throw std::invalid_argument("extract_patches: size and stride must be >= 1");
  if (spec.size > std::min(img.width(), img.height()))
    throw std::invalid_argument("extract_patches: patch size exceeds image");
  std::optional<std::mt19937_64> rng;
  if (augment_seed) rng.emplace(*augment_seed);
  std::vector<ImageGray> out;
  for (Eigen::Index r = 0; r + spec.size <= img.height(); r += spec.stride) {
    for (Eigen::Index c = 0; c + spec.size <= img.width(); c += spec.stride) {
      PixelArray block = img.pixels.block(r, c, spec.size, spec.size);
      if (rng) block = dihedral(block, static_cast<int>((*rng)() % 8));
      out.emplace_back(std::move(block), img.lo, img.hi);
    }
  }
  return out;
}

}  // namespace spikecode
