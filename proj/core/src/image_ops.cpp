#include "activebasis/image_ops.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "activebasis/error.hpp"

namespace abm {

Rect Rect::intersect(const Rect& o) const {
  return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
}

Rect Rect::unite(const Rect& o) const {
  if (empty()) return o;
  if (o.empty()) return *this;
  return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
}

GrayImage load_gray(const std::filesystem::path& path, const LumaWeights& luma) {
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw IoError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (raw.empty()) throw IoError("cannot read image " + path.string());

  double range = 1.0;
  switch (raw.depth()) {
    case CV_8U: range = 255.0; break;
    case CV_16U: range = 65535.0; break;
    case CV_32F:
    case CV_64F: range = 1.0; break;
    default: throw IoError("unsupported pixel depth in " + path.string());
  }
  cv::Mat values;
  raw.convertTo(values, CV_64F, 1.0 / range);

  GrayImage out(values.cols, values.rows);
  const int channels = values.channels();
  for (int y = 0; y < values.rows; ++y) {
    const double* row = values.ptr<double>(y);
    for (int x = 0; x < values.cols; ++x) {
      const double* px = row + static_cast<std::ptrdiff_t>(x) * channels;
      if (channels == 1 || channels == 2) {
        out.at(x, y) = px[0];
      } else {
        // OpenCV stores colour as BGR(A).
        out.at(x, y) = luma.r * px[2] + luma.g * px[1] + luma.b * px[0];
      }
    }
  }
  return out;
}

ResponseMaps::ResponseMaps(int width, int height, int orientations, int margin)
    : width_(width),
      height_(height),
      orientations_(orientations),
      margin_(margin),
      valid_{margin, margin, width - margin, height - margin} {
  const std::size_t n = static_cast<std::size_t>(width) * height * orientations;
  cos_.assign(n, 0.0);
  sin_.assign(n, 0.0);
  energy_.assign(n, 0.0);
  if (valid_.empty()) valid_ = {};
}

void ResponseMaps::set(int o, int x, int y, double c, double s) {
  const std::size_t i = index(o, x, y);
  cos_[i] = c;
  sin_[i] = s;
  energy_[i] = c * c + s * s;
}

void ResponseMaps::scale(double factor) {
  for (std::size_t i = 0; i < cos_.size(); ++i) {
    cos_[i] *= factor;
    sin_[i] *= factor;
    energy_[i] = cos_[i] * cos_[i] + sin_[i] * sin_[i];
  }
}

ResponseMaps ResponseMaps::crop(int x0, int y0, int w, int h) const {
  ResponseMaps out(w, h, orientations_, margin_);
  const Rect shifted{valid_.x0 - x0, valid_.y0 - y0, valid_.x1 - x0, valid_.y1 - y0};
  out.valid_ = shifted.intersect({0, 0, w, h});
  if (out.valid_.empty()) {
    out.valid_ = {};
    return out;
  }
  for (int o = 0; o < orientations_; ++o) {
    for (int y = out.valid_.y0; y < out.valid_.y1; ++y) {
      for (int x = out.valid_.x0; x < out.valid_.x1; ++x) {
        const std::size_t src = index(o, x + x0, y + y0);
        const std::size_t dst = out.index(o, x, y);
        out.cos_[dst] = cos_[src];
        out.sin_[dst] = sin_[src];
        out.energy_[dst] = energy_[src];
      }
    }
  }
  return out;
}

ResponseMaps compute_responses(const GrayImage& image, const Dictionary& dict) {
  const int len = dict.length();
  const int half = dict.half();
  if (image.width < len || image.height < len) {
    throw SizeError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    " is smaller than the " + std::to_string(len) + " px Gabor support");
  }
  const int num_o = dict.orientations();
  ResponseMaps maps(image.width, image.height, num_o, half);
  const Rect valid = maps.valid();
  const int w = image.width;
  const int rows = valid.y1 - valid.y0;

#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < num_o; ++o) {
    for (int r = 0; r < rows; ++r) {
      const int y = valid.y0 + r;
      const GaborElement& g = dict.prototype(o);
      std::vector<double> acc_c(w, 0.0), acc_s(w, 0.0);
      for (int ky = 0; ky < len; ++ky) {
        const double* row = image.pixels.data() + static_cast<std::size_t>(y - half + ky) * w;
        const double* kc = g.cosine.data() + ky * len;
        const double* ks = g.sine.data() + ky * len;
        for (int kx = 0; kx < len; ++kx) {
          const double wc = kc[kx];
          const double ws = ks[kx];
          const double* src = row + kx;
          for (int x = valid.x0; x < valid.x1; ++x) {
            acc_c[x] += wc * src[x - half];
            acc_s[x] += ws * src[x - half];
          }
        }
      }
      for (int x = valid.x0; x < valid.x1; ++x) maps.set(o, x, y, acc_c[x], acc_s[x]);
    }
  }
  return maps;
}

double response_sigma(const ResponseMaps& responses) {
  const Rect v = responses.valid();
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (int o = 0; o < responses.orientations(); ++o) {
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) sum += responses.energy(o, x, y);
    }
  }
  const double count = static_cast<double>(v.x1 - v.x0) * (v.y1 - v.y0) * responses.orientations();
  return std::sqrt(sum / count);
}

namespace {

double degenerate_threshold(const GrayImage& image) {
  double peak = 1.0;
  for (double p : image.pixels) peak = std::max(peak, std::abs(p));
  return 1e-9 * peak;
}

}  // namespace

PreparedImage prepare_image(const GrayImage& image, const Dictionary& dict) {
  PreparedImage out;
  out.responses = compute_responses(image, dict);
  out.sigma = response_sigma(out.responses);
  if (!(out.sigma > degenerate_threshold(image))) {
    throw DegenerateImageError("image has no filter response (sigma_s = " + std::to_string(out.sigma) + ")");
  }
  out.image = image;
  for (double& p : out.image.pixels) p /= out.sigma;
  out.responses.scale(1.0 / out.sigma);
  return out;
}

GrayImage normalize_image(const GrayImage& image, const Dictionary& dict) {
  return prepare_image(image, dict).image;
}

double sample_bilinear(const GrayImage& image, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double tx = x - x0;
  const double ty = y - y0;
  const double top = (1.0 - tx) * image.at(x0, y0) + tx * image.at(x1, y0);
  const double bottom = (1.0 - tx) * image.at(x0, y1) + tx * image.at(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

GrayImage resample(const GrayImage& image, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ConfigError("resize factor must be > 0");
  const int w = static_cast<int>(std::lround(image.width * factor));
  const int h = static_cast<int>(std::lround(image.height * factor));
  if (w < 1 || h < 1) return {};
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5) / factor - 0.5;
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = sample_bilinear(image, (x + 0.5) / factor - 0.5, sy);
    }
  }
  return out;
}

ImagePyramid build_pyramid(const GrayImage& image, std::span<const double> factors, int min_side) {
  if (factors.empty()) throw ConfigError("pyramid needs at least one factor");
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] > 0.0)) throw ConfigError("pyramid factors must be > 0");
    if (i > 0 && !(factors[i] < factors[i - 1])) {
      throw ConfigError("pyramid factors must be strictly decreasing");
    }
  }
  ImagePyramid levels;
  for (double f : factors) {
    GrayImage level = f == 1.0 ? image : resample(image, f);
    if (level.width < min_side || level.height < min_side) {
      spdlog::warn("pyramid level {} ({}x{}) is smaller than {} px; dropped", f, level.width,
                   level.height, min_side);
      continue;
    }
    levels.push_back({f, std::move(level)});
  }
  if (levels.empty()) throw SizeError("every pyramid level is smaller than the Gabor support");
  return levels;
}

std::vector<double> default_factor_ladder() {
  std::vector<double> out;
  for (int k = 4; k >= -8; --k) out.push_back(std::exp2(k / 4.0));
  return out;
}

namespace {

template <typename T>
void write_le(std::ofstream& os, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), bytes.size());
  } else {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

}  // namespace

void dump_responses(const std::filesystem::path& path, const ResponseMaps& responses) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  write_le<std::int32_t>(os, responses.width());
  write_le<std::int32_t>(os, responses.height());
  write_le<std::int32_t>(os, responses.orientations());
  for (double e : responses.energy_data()) write_le<double>(os, e);
  if (!os) throw IoError("short write to " + path.string());
}

}  // namespace abm
