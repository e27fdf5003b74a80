#include "activebasis/sketch.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "activebasis/error.hpp"

namespace abm {

void draw_bar(Raster8& canvas, double cx, double cy, double alpha, double length, std::uint8_t value) {
  const double ax = -std::sin(alpha), ay = std::cos(alpha);  // along the bar
  const double nx = std::cos(alpha), ny = std::sin(alpha);   // across
  const double half = (length - 1.0) / 2.0;
  const int reach = static_cast<int>(std::ceil(half)) + 2;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx)) - reach);
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(cx)) + reach);
  const int y0 = std::max(0, static_cast<int>(std::floor(cy)) - reach);
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(cy)) + reach);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double u = x - cx, v = y - cy;
      const double along = u * ax + v * ay;
      const double across = u * nx + v * ny;
      if (std::abs(along) <= half + 1e-9 && across >= -1.0 && across < 1.0) {
        canvas.at(x, y) = std::min(canvas.at(x, y), value);
      }
    }
  }
}

namespace {

double max_lambda(const ActiveBasisTemplate& tmpl) {
  double m = 0.0;
  for (const auto& e : tmpl.elements) m = std::max(m, e.weight.lambda);
  return m;
}

std::uint8_t shade(double lambda, double top) {
  if (!(top > 0.0)) return 0;
  return static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp(lambda / top, 0.0, 1.0))));
}

}  // namespace

Raster8 render_sketch(const ActiveBasisTemplate& tmpl, int width, int height) {
  Raster8 canvas(width, height);
  const double top = max_lambda(tmpl);
  for (const auto& e : tmpl.elements) {
    draw_bar(canvas, e.x, e.y, tmpl.gabor.angle(e.orientation), tmpl.gabor.length_px, shade(e.weight.lambda, top));
  }
  return canvas;
}

namespace {

void draw_deformed(Raster8& canvas, const ActiveBasisTemplate& tmpl, const DeformedTemplate& deformed,
                   double factor) {
  const double top = max_lambda(tmpl);
  const std::size_t count = std::min(tmpl.elements.size(), deformed.elements.size());
  for (std::size_t i = 0; i < count; ++i) {
    const Pose& p = deformed.elements[i].pose;
    draw_bar(canvas, (p.x + 0.5) / factor - 0.5, (p.y + 0.5) / factor - 0.5, tmpl.gabor.angle(p.orientation),
             tmpl.gabor.length_px / factor, shade(tmpl.elements[i].weight.lambda, top));
  }
}

}  // namespace

Raster8 render_deformed(const ActiveBasisTemplate& tmpl, const DeformedTemplate& deformed, int width, int height,
                        double factor) {
  Raster8 canvas(width, height);
  draw_deformed(canvas, tmpl, deformed, factor);
  return canvas;
}

Raster8 to_raster(const GrayImage& image) {
  Raster8 out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(image.pixels[i], 0.0, 1.0)));
  }
  return out;
}

Raster8 render_overlay(const GrayImage& image, const ActiveBasisTemplate& tmpl, const Detection& detection) {
  Raster8 canvas = to_raster(image);
  for (auto& p : canvas.pixels) p = static_cast<std::uint8_t>(128 + p / 2);
  draw_deformed(canvas, tmpl, detection.deformed, detection.factor);
  return canvas;
}

GrayImage synthesize_template_image(const ActiveBasisTemplate& tmpl, const Dictionary& dict, int width, int height,
                                    int cx, int cy, double amplitude) {
  GrayImage out(width, height);
  const int h = dict.half();
  for (const auto& e : tmpl.elements) {
    const GaborElement& g = dict.prototype(e.orientation);
    const int ex = cx + e.x - tmpl.center_x();
    const int ey = cy + e.y - tmpl.center_y();
    for (int dy = -h; dy <= h; ++dy) {
      for (int dx = -h; dx <= h; ++dx) {
        const int x = ex + dx, y = ey + dy;
        if (x >= 0 && y >= 0 && x < width && y < height) out.at(x, y) += amplitude * g.cos_at(dx, dy);
      }
    }
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_png(const std::filesystem::path& path, const Raster8& raster,
               const std::map<std::string, std::string>& text) {
  if (raster.width < 1 || raster.height < 1) throw IoError("cannot write an empty raster");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::unique_ptr<std::FILE, FileCloser> f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, raster.width, raster.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_text> chunks;
    for (const auto& [key, value] : text) {
      png_text t{};
      t.compression = PNG_TEXT_COMPRESSION_NONE;
      t.key = const_cast<char*>(key.c_str());
      t.text = const_cast<char*>(value.c_str());
      t.text_length = value.size();
      chunks.push_back(t);
    }
    if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
    png_write_info(png, info);
    for (int y = 0; y < raster.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(raster.pixels.data() + static_cast<std::size_t>(y) * raster.width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Raster8 read_png(const std::filesystem::path& path, std::map<std::string, std::string>* text) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  Raster8 out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + " is not an 8-bit grayscale PNG");
  }
  out = Raster8(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
  for (int y = 0; y < out.height; ++y) png_read_row(png, out.pixels.data() + static_cast<std::size_t>(y) * out.width, nullptr);
  png_read_end(png, info);
  if (text) {
    png_textp chunks = nullptr;
    int count = 0;
    png_get_text(png, info, &chunks, &count);
    for (int i = 0; i < count; ++i) (*text)[chunks[i].key] = std::string(chunks[i].text, chunks[i].text_length);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace abm
