#pragma once

#include <array>
#include <memory>
#include <vector>

#include "activebasis/gabor.hpp"
#include "activebasis/image_ops.hpp"
#include "activebasis/stat_model.hpp"

namespace abm {

/// Allowed perturbations A(alpha): shifts d in [-b1, b1] along the element's
/// normal and orientation offsets within [-b2, b2], both on the lattice.
struct ActivitySet {
  int b1 = 6;
  double b2 = kPi / 15.0;

  static ActivitySet none() { return {0, 0.0}; }

  struct Member {
    int d;        ///< shift along the normal, pixels
    int dorient;  ///< orientation offset in dictionary steps
    int dx;       ///< rounded d cos(alpha)
    int dy;       ///< rounded d sin(alpha)
  };

  /// Largest orientation offset (in steps of pi/O) within b2.
  int max_orientation_step(const Dictionary& dict) const;

  /// Members for orientation index `o`, in tie-break order: smallest |d|,
  /// then smallest |dorient|, then d, then dorient. (0, 0) comes first.
  std::vector<Member> members(const Dictionary& dict, int o) const;

  bool operator==(const ActivitySet&) const = default;
};

using ActivityTable = std::vector<std::vector<ActivitySet::Member>>;
ActivityTable activity_table(const ActivitySet& act, const Dictionary& dict);

/// (o + step) wrapped into [0, O).
inline int wrap_orientation(int o, int count) { return ((o % count) + count) % count; }

struct TemplateElement {
  int x = 0;
  int y = 0;
  int orientation = 0;
  ElementWeight weight;
  double pursuit_index = 0.0;  ///< weighted index at selection time

  Pose pose() const { return {x, y, orientation}; }
  bool operator==(const TemplateElement&) const = default;
};

/// The learned deformable template B with its weights. Element coordinates are
/// lattice pixels; detection places the lattice centre (width/2, height/2).
struct ActiveBasisTemplate {
  int width = 0;
  int height = 0;
  GaborParams gabor;
  double scale = 0.0;
  ActivitySet activity;
  std::vector<TemplateElement> elements;
  std::shared_ptr<const ReferenceModel> reference;

  int center_x() const { return width / 2; }
  int center_y() const { return height / 2; }
  std::size_t size() const { return elements.size(); }

  /// First `count` elements (the template after `count` pursuit steps).
  ActiveBasisTemplate prefix(std::size_t count) const;
};

/// One element's perturbation on one image, with the coefficient it retrieved.
struct Activity {
  int d = 0;
  int dorient = 0;
  Pose pose;  ///< perturbed lattice pose
  double cos_coef = 0.0;
  double sin_coef = 0.0;
  double energy = 0.0;

  bool operator==(const Activity&) const = default;
};

struct DeformedTemplate {
  int image = -1;
  std::vector<Activity> elements;
  double score = 0.0;
};

/// Sum of element_score over the deformed template's retrieved energies.
double recompute_score(const ActiveBasisTemplate& tmpl, const DeformedTemplate& deformed);

struct WeightedImage {
  ResponseMaps responses;
  double weight = 1.0;
};

enum class ResponseUpdate {
  kZero,      ///< zero every response correlated above epsilon with the selection
  kSubtract,  ///< subtract the selection's projection (residual-free update)
};

struct SketchOptions {
  int n = 50;
  double epsilon = 0.1;
  ActivitySet activity;
  ResponseUpdate update = ResponseUpdate::kZero;
  bool saturate = true;  ///< pursuit index on h(r); false uses raw energy
};

struct SketchStep {
  Pose pose;
  double index = 0.0;
};

struct SketchResult {
  ActiveBasisTemplate tmpl;
  std::vector<DeformedTemplate> deformed;  ///< one per input image
  std::vector<double> scores;              ///< per-image log-likelihood ratio
  std::vector<SketchStep> steps;
  bool exhausted = false;  ///< stopped before n elements
};

/// Weighted shared sketch. Images (working copies) must share one lattice.
/// Each step selects the pose maximizing sum_k w_k max_A h(energy) (exact ties:
/// larger weighted raw energy at the pose, then pooled over A, then scan
/// order), retrieves every image's activity, fits lambda to the weighted mean of h, inhibits,
/// and accumulates per-image scores.
SketchResult shared_sketch(std::vector<WeightedImage> images, const Dictionary& dict,
                           std::shared_ptr<const ReferenceModel> reference, const SketchOptions& options);

/// Arg-max energy member of A(alpha) around `nominal`; invalid candidates are
/// skipped. Throws MarginError when none is valid.
Activity retrieve_activity(const ResponseMaps& responses, const Pose& nominal, const ActivitySet& act,
                           const Dictionary& dict);
Activity retrieve_activity(const ResponseMaps& responses, const Pose& nominal,
                           const std::vector<ActivitySet::Member>& members, int orientations);

/// Zeroes every valid response whose element correlates with `selected` above epsilon.
/// Returns the touched rectangle.
Rect inhibit(ResponseMaps& responses, const Pose& selected, double epsilon, const Dictionary& dict);

/// R(x, a) -= c * <B_{x,a}, B_selected> for every overlapping element.
Rect subtract_projection(ResponseMaps& responses, const Pose& selected, double cos_coef, double sin_coef,
                         const Dictionary& dict);

struct MatchingPursuitResult {
  std::vector<Pose> elements;
  std::vector<std::array<double, 2>> coefficients;
  GrayImage residual;
};

/// Single-image matching pursuit with an explicit residual image.
/// Throws SizeError when n exceeds the number of valid lattice elements.
MatchingPursuitResult matching_pursuit(const GrayImage& image, const Dictionary& dict, int n);

}  // namespace abm
