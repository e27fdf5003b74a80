#pragma once

#include <cstdint>
#include <vector>

#include "activebasis/gabor.hpp"
#include "activebasis/image_ops.hpp"
#include "activebasis/pursuit.hpp"
#include "activebasis/stat_model.hpp"

namespace abm::test {

/// 7-px, 3-orientation dictionary for tiny lattices.
Dictionary toy_dictionary();

GrayImage random_image(int w, int h, std::uint64_t seed);

/// Filled bar (|along| <= length/2, |across| <= thickness/2) along (-sin a, cos a).
struct Bar {
  double cx;
  double cy;
  double angle;
  double length;
  double thickness = 2.0;
  double value = 1.0;
};

/// Bars over a flat gray background with N(0, noise) pixel noise.
GrayImage draw_bars(int w, int h, const std::vector<Bar>& bars, double background, double noise, std::uint64_t seed);

/// Dark bars (value 0) over `texture` pulled to half contrast around 0.5.
GrayImage bars_over_texture(const GrayImage& texture, const std::vector<Bar>& bars);

/// Embeds the cosine component of dict's prototype `o` centred at (x, y), times `amp`.
void add_cosine(GrayImage& image, const Dictionary& dict, int x, int y, int o, double amp = 1.0);

/// Asymmetric two-bar motif (a long vertical stroke with a short oblique arm
/// at its top right) centred at (cx, cy).
std::vector<Bar> asymmetric_motif(double cx, double cy, double scale = 1.0);

/// cols x rows grid of elements `spacing` px apart with random orientations and
/// lambdas in [1, 5]. With spacing > L the rendered atoms do not overlap.
ActiveBasisTemplate spaced_template(const Dictionary& dict, std::shared_ptr<const ReferenceModel> ref, int cols,
                                    int rows, int spacing, std::uint64_t seed);

/// Reference model pooled from the bundled synthetic background.
std::shared_ptr<const ReferenceModel> synthetic_reference(const Dictionary& dict);

}  // namespace abm::test
