#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "activebasis/gabor.hpp"

namespace abm {

/// Real-valued grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  bool empty() const { return pixels.empty(); }
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  Rect intersect(const Rect& o) const;
  Rect unite(const Rect& o) const;
  Rect grow(int by) const { return {x0 - by, y0 - by, x1 + by, y1 + by}; }

  bool operator==(const Rect&) const = default;
};

struct LumaWeights {
  double r = 0.299;
  double g = 0.587;
  double b = 0.114;
};

/// Decodes PNG/PGM/JPEG into luminance in [0, 1]. Throws IoError.
GrayImage load_gray(const std::filesystem::path& path, const LumaWeights& luma = {});

/// Per-orientation cosine/sine projections and their energy. Entries outside
/// valid() are undefined (held at zero) and never take part in argmax.
class ResponseMaps {
 public:
  ResponseMaps() = default;
  ResponseMaps(int width, int height, int orientations, int margin);

  int width() const { return width_; }
  int height() const { return height_; }
  int orientations() const { return orientations_; }
  int margin() const { return margin_; }
  const Rect& valid() const { return valid_; }
  bool is_valid(int x, int y) const { return valid_.contains(x, y); }

  std::size_t index(int o, int x, int y) const {
    return (static_cast<std::size_t>(o) * height_ + y) * width_ + x;
  }
  double cos_resp(int o, int x, int y) const { return cos_[index(o, x, y)]; }
  double sin_resp(int o, int x, int y) const { return sin_[index(o, x, y)]; }
  double energy(int o, int x, int y) const { return energy_[index(o, x, y)]; }

  void set(int o, int x, int y, double c, double s);
  void zero(int o, int x, int y) { set(o, x, y, 0.0, 0.0); }
  /// Multiplies both components by `factor` everywhere.
  void scale(double factor);

  /// Copy of the window [x0, x0 + w) x [y0, y0 + h); positions that fall
  /// outside this map's valid region are invalid in the copy.
  ResponseMaps crop(int x0, int y0, int w, int h) const;

  const std::vector<double>& cos_data() const { return cos_; }
  const std::vector<double>& sin_data() const { return sin_; }
  const std::vector<double>& energy_data() const { return energy_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int orientations_ = 0;
  int margin_ = 0;
  Rect valid_;
  std::vector<double> cos_;
  std::vector<double> sin_;
  std::vector<double> energy_;
};

/// Raw projections of `image` onto every lattice element whose support lies
/// inside the image. Throws SizeError when the image is smaller than the support.
ResponseMaps compute_responses(const GrayImage& image, const Dictionary& dict);

/// sigma_s: root mean energy over the valid region and all orientations.
double response_sigma(const ResponseMaps& responses);

/// I / sigma_s. Throws DegenerateImageError when sigma_s vanishes.
GrayImage normalize_image(const GrayImage& image, const Dictionary& dict);

/// A contrast-normalized image together with its responses, computed with a
/// single filtering pass (responses are scaled by 1 / sigma_s).
struct PreparedImage {
  GrayImage image;
  ResponseMaps responses;
  double sigma = 1.0;
};
PreparedImage prepare_image(const GrayImage& image, const Dictionary& dict);

/// Bilinear resampling by `factor` (output size rounds w*factor, h*factor),
/// pixel centres aligned.
GrayImage resample(const GrayImage& image, double factor);

/// Bilinear sample with edge clamping.
double sample_bilinear(const GrayImage& image, double x, double y);

struct PyramidLevel {
  double factor = 1.0;
  GrayImage image;
};
using ImagePyramid = std::vector<PyramidLevel>;

/// Levels for strictly decreasing factors; levels smaller than the Gabor
/// support (`min_side`) are dropped with a warning. Throws SizeError if all drop.
ImagePyramid build_pyramid(const GrayImage& image, std::span<const double> factors, int min_side);

/// 2^(k/4) for k = 4 .. -8.
std::vector<double> default_factor_ladder();

/// Flat little-endian dump: int32 width, height, O, then float64 energies in
/// (orientation, row, col) order.
void dump_responses(const std::filesystem::path& path, const ResponseMaps& responses);

}  // namespace abm
