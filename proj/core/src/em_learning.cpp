#include "activebasis/em_learning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "activebasis/error.hpp"

namespace abm {

GrayImage mirror(const GrayImage& image) {
  GrayImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) out.at(x, y) = image.at(image.width - 1 - x, y);
  }
  return out;
}

GrayImage rotate_crop(const GrayImage& image, double angle, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw SizeError("rotation crop is empty");
  GrayImage out(out_w, out_h);
  const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
  const double ox = (out_w - 1) / 2.0, oy = (out_h - 1) / 2.0;
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double u = x - ox, v = y - oy;
      out.at(x, y) = sample_bilinear(image, cx + u * c - v * s, cy + u * s + v * c);
    }
  }
  return out;
}

std::pair<int, int> rotation_crop_size(int width, int height, std::span<const double> angles) {
  double k = 1.0;
  for (double a : angles) {
    const double c = std::abs(std::cos(a)), s = std::abs(std::sin(a));
    k = std::min({k, width / (width * c + height * s), height / (width * s + height * c)});
  }
  // Tolerate rounding when the only angle is 0.
  const int w = static_cast<int>(std::floor(k * width + 1e-9));
  const int h = static_cast<int>(std::floor(k * height + 1e-9));
  return {w, h};
}

double flip_posterior(double log_p_original, double log_p_mirror, double rho) {
  if (rho >= 1.0) return 1.0;
  if (rho <= 0.0) return 0.0;
  // z = 1 / (1 + exp(t)), t = log-odds against the original orientation.
  const double t = (std::log1p(-rho) + log_p_mirror) - (std::log(rho) + log_p_original);
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

namespace {

std::vector<ResponseMaps> prepare_all(const std::vector<GrayImage>& images, const Dictionary& dict) {
  std::vector<ResponseMaps> out(images.size());
  std::vector<std::string> errors(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      out[i] = prepare_image(images[i], dict).responses;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw DegenerateImageError("training image " + std::to_string(i) + ": " + errors[i]);
  }
  return out;
}

void check_em(std::size_t count, const EmOptions& options) {
  if (count < 2) throw ConfigError("EM learning needs at least two images");
  if (options.iterations < 1) throw ConfigError("EM learning needs at least one iteration");
}

}  // namespace

FlipResult em_flip(std::span<const GrayImage> images, const Dictionary& dict,
                   std::shared_ptr<const ReferenceModel> reference, const EmOptions& options) {
  check_em(images.size(), options);
  const std::size_t m_count = images.size();
  std::vector<GrayImage> variants;
  variants.reserve(2 * m_count);
  for (const GrayImage& im : images) {
    variants.push_back(im);
    variants.push_back(mirror(im));
  }
  const std::vector<ResponseMaps> responses = prepare_all(variants, dict);

  FlipResult result;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  result.state.z_hat.resize(m_count);
  for (double& z : result.state.z_hat) z = unit(rng);
  double sum = 0.0;
  for (double z : result.state.z_hat) sum += z;
  result.state.rho = sum / static_cast<double>(m_count);

  SketchResult last;
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<WeightedImage> weighted;
    weighted.reserve(2 * m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      weighted.push_back({responses[2 * m], result.state.z_hat[m]});
      weighted.push_back({responses[2 * m + 1], 1.0 - result.state.z_hat[m]});
    }
    last = shared_sketch(std::move(weighted), dict, reference, options.sketch);

    FlipIteration record;
    record.tmpl = last.tmpl;
    record.degenerate = true;
    for (std::size_t m = 0; m < m_count; ++m) {
      const double l1 = last.scores[2 * m];
      const double l0 = last.scores[2 * m + 1];
      record.score_original.push_back(l1);
      record.score_mirror.push_back(l0);
      if (l1 != l0) record.degenerate = false;
      result.state.z_hat[m] = flip_posterior(l1, l0, result.state.rho);
    }
    sum = 0.0;
    for (double z : result.state.z_hat) sum += z;
    result.state.rho = sum / static_cast<double>(m_count);
    if (record.degenerate) spdlog::warn("flip EM iteration {}: every image scores both variants equally", it + 1);
    record.state = result.state;
    result.history.push_back(std::move(record));
  }

  result.tmpl = last.tmpl;
  for (std::size_t m = 0; m < m_count; ++m) {
    const int z = result.state.z_hat[m] > 0.5 ? 1 : 0;
    result.assignments.push_back(z);
    DeformedTemplate d = last.deformed[z == 1 ? 2 * m : 2 * m + 1];
    d.image = static_cast<int>(m);
    result.deformed.push_back(std::move(d));
  }
  return result;
}

RotationResult em_rotate(std::span<const GrayImage> images, const Dictionary& dict,
                         std::shared_ptr<const ReferenceModel> reference, std::span<const double> angles,
                         const EmOptions& options) {
  if (images.empty()) throw ConfigError("EM learning needs at least one image");
  if (options.iterations < 1) throw ConfigError("EM learning needs at least one iteration");
  if (angles.empty() || std::none_of(angles.begin(), angles.end(), [](double a) { return std::abs(a) < 1e-12; })) {
    throw ConfigError("rotation set must include 0");
  }
  const std::size_t m_count = images.size();
  const std::size_t j_count = angles.size();
  for (const auto& im : images) {
    if (im.width != images.front().width || im.height != images.front().height) {
      throw SizeError("rotation EM images must share one size");
    }
  }
  const auto [crop_w, crop_h] = rotation_crop_size(images.front().width, images.front().height, angles);

  std::vector<GrayImage> variants;
  variants.reserve(m_count * j_count);
  for (const GrayImage& im : images) {
    for (double a : angles) variants.push_back(a == 0.0 && crop_w == im.width && crop_h == im.height
                                                   ? im
                                                   : rotate_crop(im, a, crop_w, crop_h));
  }
  const std::vector<ResponseMaps> responses = prepare_all(variants, dict);

  RotationResult result;
  result.state.angles.assign(angles.begin(), angles.end());
  result.state.weights.assign(m_count, std::vector<double>(j_count, 0.0));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& w : result.state.weights) {
    double total = 0.0;
    for (double& v : w) total += (v = unit(rng));
    for (double& v : w) v /= total;
  }
  auto update_priors = [&] {
    result.state.priors.assign(j_count, 0.0);
    for (const auto& w : result.state.weights) {
      for (std::size_t j = 0; j < j_count; ++j) result.state.priors[j] += w[j];
    }
    for (double& p : result.state.priors) p /= static_cast<double>(m_count);
  };
  update_priors();

  SketchResult last;
  for (int it = 0; it < options.iterations; ++it) {
    std::vector<WeightedImage> weighted;
    weighted.reserve(m_count * j_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      for (std::size_t j = 0; j < j_count; ++j) {
        weighted.push_back({responses[m * j_count + j], result.state.weights[m][j]});
      }
    }
    last = shared_sketch(std::move(weighted), dict, reference, options.sketch);

    RotationIteration record;
    record.tmpl = last.tmpl;
    record.degenerate = true;
    const std::vector<double> priors = result.state.priors;
    for (std::size_t m = 0; m < m_count; ++m) {
      std::vector<double> scores(last.scores.begin() + m * j_count, last.scores.begin() + (m + 1) * j_count);
      if (std::adjacent_find(scores.begin(), scores.end(), std::not_equal_to<>()) != scores.end()) {
        record.degenerate = false;
      }
      std::vector<double> logp(j_count);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < j_count; ++j) {
        logp[j] = priors[j] > 0.0 ? std::log(priors[j]) + scores[j] : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, logp[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < j_count; ++j) total += (result.state.weights[m][j] = std::exp(logp[j] - peak));
      for (double& v : result.state.weights[m]) v /= total;
      record.scores.push_back(std::move(scores));
    }
    update_priors();
    if (record.degenerate && j_count > 1) {
      spdlog::warn("rotation EM iteration {}: every image scores all rotations equally", it + 1);
    }
    record.state = result.state;
    result.history.push_back(std::move(record));
  }

  result.tmpl = last.tmpl;
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto& w = result.state.weights[m];
    const auto j = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    result.assignments.push_back(static_cast<int>(j));
    DeformedTemplate d = last.deformed[m * j_count + j];
    d.image = static_cast<int>(m);
    result.deformed.push_back(std::move(d));
  }
  return result;
}

LocateResult em_locate(std::span<const GrayImage> images, const Dictionary& dict,
                       std::shared_ptr<const ReferenceModel> reference, const LocateOptions& options) {
  if (images.empty()) throw ConfigError("EM learning needs at least one image");
  if (options.em.iterations < 1) throw ConfigError("EM learning needs at least one iteration");
  const int lw = options.lattice_width, lh = options.lattice_height;
  if (lw < dict.length() || lh < dict.length()) throw ConfigError("template lattice must hold the Gabor support");
  const GrayImage& first = images.front();
  if (first.width < lw || first.height < lh) throw SizeError("template lattice is larger than the first image");

  const std::size_t m_count = images.size();
  const std::size_t variant_count = options.with_flip ? 2 : 1;
  // levels[m * variant_count + v]: pyramid of image m (v = 1 mirrored).
  std::vector<std::vector<PreparedLevel>> levels(m_count * variant_count);
  std::vector<std::string> errors(levels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const GrayImage& im = images[i / variant_count];
    try {
      levels[i] = prepare_pyramid(i % variant_count == 1 ? mirror(im) : im, dict, options.factors);
    } catch (const SizeError& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) spdlog::warn("image {}: {}", i / variant_count, errors[i]);
  }

  // Initial template from a centred crop of image 1 with frozen activities.
  ActiveBasisTemplate tmpl;
  {
    const PreparedImage init = prepare_image(first, dict);
    SketchOptions frozen = options.em.sketch;
    frozen.activity = ActivitySet::none();
    std::vector<WeightedImage> one;
    one.push_back({init.responses.crop((first.width - lw) / 2, (first.height - lh) / 2, lw, lh), 1.0});
    tmpl = shared_sketch(std::move(one), dict, reference, frozen).tmpl;
    tmpl.activity = options.em.sketch.activity;
  }

  LocateResult result;
  SketchResult last;
  for (int it = 0; it < options.em.iterations; ++it) {
    LocateIteration record;
    record.tmpl = tmpl;
    record.state.placements.resize(m_count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t m = 0; m < m_count; ++m) {
      Placement best;
      for (std::size_t v = 0; v < variant_count; ++v) {
        const auto& lv = levels[m * variant_count + v];
        if (lv.empty()) continue;
        try {
          const Detection d = detect(lv, tmpl, dict);
          if (!best.included || d.score > best.score) {
            best = {true, d.x, d.y, d.factor, d.level, v == 1, d.score};
          }
        } catch (const SizeError&) {
        }
      }
      record.state.placements[m] = best;
    }

    std::vector<WeightedImage> crops;
    for (std::size_t m = 0; m < m_count; ++m) {
      const Placement& p = record.state.placements[m];
      if (!p.included) {
        spdlog::warn("image {} admits no valid placement; excluded from iteration {}", m, it + 1);
        continue;
      }
      record.total_score += p.score;
      const auto& level = levels[m * variant_count + (p.mirrored ? 1 : 0)][p.level];
      crops.push_back({level.responses.crop(p.x - lw / 2, p.y - lh / 2, lw, lh), 1.0});
    }
    if (crops.empty()) throw SizeError("no training image admits the template");
    if (!result.history.empty() && record.total_score < result.history.back().total_score) {
      spdlog::warn("location EM iteration {}: total imputed score decreased ({} -> {})", it + 1,
                   result.history.back().total_score, record.total_score);
      result.monotone = false;
    }
    result.history.push_back(record);

    last = shared_sketch(std::move(crops), dict, reference, options.em.sketch);
    tmpl = last.tmpl;
  }

  result.tmpl = tmpl;
  result.state = result.history.back().state;
  std::size_t k = 0;
  for (std::size_t m = 0; m < m_count; ++m) {
    if (!result.state.placements[m].included) continue;
    DeformedTemplate d = last.deformed[k++];
    d.image = static_cast<int>(m);
    result.deformed.push_back(std::move(d));
  }
  return result;
}

}  // namespace abm
