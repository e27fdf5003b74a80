#include "activebasis/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <spdlog/spdlog.h>

#include "activebasis/error.hpp"

namespace abm {

OrientedMap sum1(const ResponseMaps& responses, double xi) {
  OrientedMap out{responses.width(), responses.height(), responses.orientations(), responses.valid(), {}};
  out.values.assign(responses.energy_data().size(), 0.0);
  const Rect v = out.valid;
  for (int o = 0; o < out.orientations; ++o) {
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) out.values[out.index(o, x, y)] = saturate(responses.energy(o, x, y), xi);
    }
  }
  return out;
}

OrientedMap max1(const OrientedMap& sum1_map, const ActivitySet& act, const Dictionary& dict) {
  const ActivityTable table = activity_table(act, dict);
  OrientedMap out = sum1_map;
  const Rect v = sum1_map.valid;
  const int num_o = sum1_map.orientations;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < num_o; ++o) {
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& m : table[o]) {
          const int xx = x + m.dx, yy = y + m.dy;
          if (!v.contains(xx, yy)) continue;
          best = std::max(best, sum1_map.at(wrap_orientation(o + m.dorient, num_o), xx, yy));
        }
        out.values[out.index(o, x, y)] = best;
      }
    }
  }
  return out;
}

Rect template_extent(const ActiveBasisTemplate& tmpl, const Dictionary& dict) {
  const ActivityTable table = activity_table(tmpl.activity, dict);
  Rect extent;
  bool first = true;
  for (const auto& e : tmpl.elements) {
    for (const auto& m : table[e.orientation]) {
      const int x = e.x - tmpl.center_x() + m.dx;
      const int y = e.y - tmpl.center_y() + m.dy;
      const Rect point{x, y, x + 1, y + 1};
      extent = first ? point : extent.unite(point);
      first = false;
    }
  }
  return extent;
}

Rect placement_region(const ActiveBasisTemplate& tmpl, const Dictionary& dict, const Rect& valid) {
  if (tmpl.elements.empty()) return valid;
  const Rect e = template_extent(tmpl, dict);
  Rect r{valid.x0 - e.x0, valid.y0 - e.y0, valid.x1 - (e.x1 - 1), valid.y1 - (e.y1 - 1)};
  return r.empty() ? Rect{} : r;
}

Sum2Map sum2(const OrientedMap& max1_map, const ActiveBasisTemplate& tmpl, const Dictionary& dict) {
  Sum2Map out;
  out.width = max1_map.width;
  out.height = max1_map.height;
  out.placements = placement_region(tmpl, dict, max1_map.valid);
  if (out.placements.empty()) throw SizeError("template does not fit inside the image's valid region");
  out.values.assign(static_cast<std::size_t>(out.width) * out.height, -std::numeric_limits<double>::infinity());
  const Rect p = out.placements;
  for (int y = p.y0; y < p.y1; ++y) {
    for (int x = p.x0; x < p.x1; ++x) out.values[static_cast<std::size_t>(y) * out.width + x] = 0.0;
  }
  const int cx = tmpl.center_x(), cy = tmpl.center_y();
  for (const auto& e : tmpl.elements) {
    const double lambda = e.weight.lambda;
    const double log_z = e.weight.log_z;
    const int ox = e.x - cx, oy = e.y - cy;
    for (int y = p.y0; y < p.y1; ++y) {
      double* row = out.values.data() + static_cast<std::size_t>(y) * out.width;
      for (int x = p.x0; x < p.x1; ++x) row[x] += lambda * max1_map.at(e.orientation, x + ox, y + oy) - log_z;
    }
  }
  return out;
}

Dictionary dictionary_for(const ActiveBasisTemplate& tmpl) { return Dictionary(tmpl.gabor, tmpl.scale); }

std::vector<PreparedLevel> prepare_pyramid(const GrayImage& image, const Dictionary& dict,
                                           std::span<const double> factors) {
  ImagePyramid pyramid = build_pyramid(image, factors, dict.length());
  std::vector<PreparedLevel> levels(pyramid.size());
  std::vector<std::string> errors(pyramid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pyramid.size(); ++i) {
    try {
      PreparedImage prepared = prepare_image(pyramid[i].image, dict);
      levels[i] = {pyramid[i].factor, std::move(prepared.image), std::move(prepared.responses)};
    } catch (const DegenerateImageError& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& msg : errors) {
    if (!msg.empty()) throw DegenerateImageError(msg);
  }
  return levels;
}

DeformedTemplate retrieve_deformed(const ResponseMaps& responses, const ActiveBasisTemplate& tmpl,
                                   const Dictionary& dict, int x, int y) {
  const ActivityTable table = activity_table(tmpl.activity, dict);
  DeformedTemplate out;
  for (const auto& e : tmpl.elements) {
    const Pose nominal{x + e.x - tmpl.center_x(), y + e.y - tmpl.center_y(), e.orientation};
    out.elements.push_back(retrieve_activity(responses, nominal, table[e.orientation], dict.orientations()));
  }
  out.score = recompute_score(tmpl, out);
  return out;
}

std::optional<Detection> detect_in_level(const PreparedLevel& level, std::size_t level_index,
                                         const ActiveBasisTemplate& tmpl, const Dictionary& dict) {
  if (placement_region(tmpl, dict, level.responses.valid()).empty()) return std::nullopt;
  const Sum2Map map = sum2(max1(sum1(level.responses, tmpl.reference->xi), tmpl.activity, dict), tmpl, dict);
  Detection best;
  best.score = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> tied;
  const Rect p = map.placements;
  for (int y = p.y0; y < p.y1; ++y) {
    for (int x = p.x0; x < p.x1; ++x) {
      const double v = map.at(x, y);
      if (v > best.score) {
        best.score = v;
        best.x = x;
        best.y = y;
        tied.assign(1, {x, y});
      } else if (v == best.score) {
        tied.emplace_back(x, y);
      }
    }
  }
  // Exact ties arise when h rounds to xi; prefer the larger lambda-weighted raw energy.
  if (tied.size() > 1) {
    const ActivityTable table = activity_table(tmpl.activity, dict);
    std::pair<double, double> top{-std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& [x, y] : tied) {
      std::pair<double, double> raw{0.0, 0.0};
      for (const auto& e : tmpl.elements) {
        const Pose nominal{x + e.x - tmpl.center_x(), y + e.y - tmpl.center_y(), e.orientation};
        raw.second += e.weight.lambda *
                     retrieve_activity(level.responses, nominal, table[e.orientation], dict.orientations()).energy;
        if (level.responses.is_valid(nominal.x, nominal.y)) {
          raw.first += e.weight.lambda * level.responses.energy(nominal.orientation, nominal.x, nominal.y);
        }
      }
      if (raw > top) {
        top = raw;
        best.x = x;
        best.y = y;
      }
    }
  }
  best.factor = level.factor;
  best.level = level_index;
  best.deformed = retrieve_deformed(level.responses, tmpl, dict, best.x, best.y);
  return best;
}

Detection detect(std::span<const PreparedLevel> levels, const ActiveBasisTemplate& tmpl, const Dictionary& dict) {
  if (!tmpl.reference) throw ConfigError("template has no reference model");
  std::vector<std::optional<Detection>> found(levels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < levels.size(); ++i) found[i] = detect_in_level(levels[i], i, tmpl, dict);

  std::optional<Detection> best;
  for (auto& d : found) {
    if (d && (!best || d->score > best->score)) best = std::move(d);
  }
  if (!best) throw SizeError("no pyramid level admits the template");
  return *best;
}

Detection detect(const GrayImage& image, const ActiveBasisTemplate& tmpl, const Dictionary& dict,
                 std::span<const double> factors) {
  const auto levels = prepare_pyramid(image, dict, factors);
  return detect(levels, tmpl, dict);
}

}  // namespace abm
