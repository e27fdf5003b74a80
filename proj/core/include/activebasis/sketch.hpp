#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "activebasis/detection.hpp"
#include "activebasis/pursuit.hpp"

namespace abm {

/// 8-bit grayscale canvas, row-major, 255 = white.
struct Raster8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Raster8() = default;
  Raster8(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Raster8&) const = default;
};

/// Darkens the pixels of a bar centred at (cx, cy) running along
/// (-sin a, cos a): |along| <= (length - 1) / 2 and normal offset in [-1, 1).
/// Overlapping bars keep the darker value.
void draw_bar(Raster8& canvas, double cx, double cy, double alpha, double length, std::uint8_t value);

/// Bar sketch of the template on its lattice; darkness proportional to lambda / max lambda.
Raster8 render_sketch(const ActiveBasisTemplate& tmpl, int width, int height);

/// Bar sketch of one deformed template; poses are taken in canvas coordinates
/// scaled by 1 / factor.
Raster8 render_deformed(const ActiveBasisTemplate& tmpl, const DeformedTemplate& deformed, int width, int height,
                        double factor = 1.0);

/// Clamped [0, 1] to 8-bit gray.
Raster8 to_raster(const GrayImage& image);

/// Deformed template of a detection drawn over the (lightened) input image.
Raster8 render_overlay(const GrayImage& image, const ActiveBasisTemplate& tmpl, const Detection& detection);

/// Sum of the cosine components of every template element with its lattice
/// centre placed at (cx, cy), scaled by `amplitude`.
GrayImage synthesize_template_image(const ActiveBasisTemplate& tmpl, const Dictionary& dict, int width, int height,
                                    int cx, int cy, double amplitude = 1.0);

/// Grayscale PNG with tEXt chunks, written via a temporary file and rename.
void write_png(const std::filesystem::path& path, const Raster8& raster,
               const std::map<std::string, std::string>& text = {});

/// Decodes an 8-bit grayscale PNG (used to check written sketches).
Raster8 read_png(const std::filesystem::path& path, std::map<std::string, std::string>* text = nullptr);

}  // namespace abm
