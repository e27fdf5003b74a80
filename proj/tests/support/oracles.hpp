#pragma once

#include <array>
#include <vector>

#include "activebasis/detection.hpp"
#include "activebasis/gabor.hpp"
#include "activebasis/image_ops.hpp"
#include "activebasis/pursuit.hpp"

namespace abm::test {

/// Both components of prototype `o` pasted into a w x h zero canvas at (x, y).
std::array<GrayImage, 2> embed_element(const Dictionary& dict, int w, int h, int x, int y, int o);

double dot(const GrayImage& a, const GrayImage& b);

/// <I, B_cos>, <I, B_sin> by a whole-canvas dot product.
std::array<double, 2> dense_response(const GrayImage& image, const Dictionary& dict, int x, int y, int o);

/// corr(B_a, B_b) from four whole-canvas dot products.
double dense_correlation(const Dictionary& dict, const Pose& a, const Pose& b);

/// Members of A(alpha) enumerated directly from b1, b2 (unsorted).
std::vector<ActivitySet::Member> brute_members(const ActivitySet& act, const Dictionary& dict, int o);

/// max over A(alpha) of h(energy) at (x, y, o), skipping invalid neighbours; -1 when none is valid.
double brute_max1(const ResponseMaps& r, const ActivitySet& act, const Dictionary& dict, double xi, int x, int y,
                  int o);

/// l(x): per element, max of h over A(alpha_i) at the placed pose, then lambda h - log Z.
double brute_score(const ResponseMaps& r, const ActiveBasisTemplate& tmpl, const Dictionary& dict, int x, int y);

/// Step-by-step weighted shared sketch replayed with exhaustive scans and
/// direct-correlation inhibition. Returns the selected poses and indices.
struct OracleStep {
  Pose pose;
  double index;
};
std::vector<OracleStep> brute_shared_sketch(std::vector<ResponseMaps> maps, const std::vector<double>& weights,
                                            const Dictionary& dict, const ActivitySet& act, double epsilon, int n,
                                            double xi);

}  // namespace abm::test
