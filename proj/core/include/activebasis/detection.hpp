#pragma once

#include <span>
#include <vector>

#include "activebasis/image_ops.hpp"
#include "activebasis/pursuit.hpp"

namespace abm {

/// Per-(x, alpha) map over one lattice; values outside `valid` are meaningless.
struct OrientedMap {
  int width = 0;
  int height = 0;
  int orientations = 0;
  Rect valid;
  std::vector<double> values;

  std::size_t index(int o, int x, int y) const {
    return (static_cast<std::size_t>(o) * height + y) * width + x;
  }
  double at(int o, int x, int y) const { return values[index(o, x, y)]; }
};

/// SUM1 = h(energy) at every valid (x, alpha).
OrientedMap sum1(const ResponseMaps& responses, double xi);

/// MAX1 = max over A(alpha) of SUM1; invalid neighbours are skipped.
OrientedMap max1(const OrientedMap& sum1_map, const ActivitySet& act, const Dictionary& dict);

/// Offsets (relative to the template centre) spanned by the template's
/// elements together with every member of their activity sets.
Rect template_extent(const ActiveBasisTemplate& tmpl, const Dictionary& dict);

/// Placements x whose full perturbed template lies inside `valid`.
Rect placement_region(const ActiveBasisTemplate& tmpl, const Dictionary& dict, const Rect& valid);

/// Template score l(x) at every placement of the template centre.
struct Sum2Map {
  int width = 0;
  int height = 0;
  double factor = 1.0;
  Rect placements;            ///< valid placements; values elsewhere are -inf
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// SUM2(x) = sum_i [lambda_i MAX1(x + x_i, alpha_i) - log Z(lambda_i)], element
/// coordinates taken relative to the template centre. Throws SizeError when no
/// placement fits.
Sum2Map sum2(const OrientedMap& max1_map, const ActiveBasisTemplate& tmpl, const Dictionary& dict);

/// Detection result; (x, y) is the template centre in the coordinates of the
/// winning pyramid level.
struct Detection {
  int x = 0;
  int y = 0;
  double factor = 1.0;
  std::size_t level = 0;
  double score = 0.0;
  DeformedTemplate deformed;

  double base_x() const { return (x + 0.5) / factor - 0.5; }
  double base_y() const { return (y + 0.5) / factor - 0.5; }
};

/// One contrast-normalized pyramid level ready for scoring.
struct PreparedLevel {
  double factor = 1.0;
  GrayImage image;
  ResponseMaps responses;
};

/// Resamples by each factor and normalizes every level on its own.
std::vector<PreparedLevel> prepare_pyramid(const GrayImage& image, const Dictionary& dict,
                                           std::span<const double> factors);

/// Best placement in one level, or nullopt when the template does not fit.
std::optional<Detection> detect_in_level(const PreparedLevel& level, std::size_t level_index,
                                         const ActiveBasisTemplate& tmpl, const Dictionary& dict);

/// Arg-max of SUM2 over all levels and placements. Within a level, exact ties
/// (saturated h) go to the larger lambda-weighted raw energy at the nominal
/// poses, then pooled over A, then row-major position; across levels the
/// earlier (higher-resolution) level wins. Throws SizeError when no level
/// admits the template.
Detection detect(std::span<const PreparedLevel> levels, const ActiveBasisTemplate& tmpl, const Dictionary& dict);
Detection detect(const GrayImage& image, const ActiveBasisTemplate& tmpl, const Dictionary& dict,
                 std::span<const double> factors);

/// Deformed template of `tmpl` placed with its centre at (x, y).
DeformedTemplate retrieve_deformed(const ResponseMaps& responses, const ActiveBasisTemplate& tmpl,
                                   const Dictionary& dict, int x, int y);

/// Dictionary matching the template's Gabor parameters and scale.
Dictionary dictionary_for(const ActiveBasisTemplate& tmpl);

}  // namespace abm
