#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "activebasis/detection.hpp"
#include "activebasis/image_ops.hpp"
#include "activebasis/pursuit.hpp"

namespace abm {

/// Horizontal reflection about the vertical centre axis.
GrayImage mirror(const GrayImage& image);

/// Image rotated by `angle` (radians, counter-clockwise on screen) about its
/// centre with bilinear resampling, cropped to a centred out_w x out_h window.
GrayImage rotate_crop(const GrayImage& image, double angle, int out_w, int out_h);

/// Largest centred window with the image's aspect ratio that stays inside the
/// source for every angle in `angles`.
std::pair<int, int> rotation_crop_size(int width, int height, std::span<const double> angles);

/// Posterior Pr(z = 1) from the two log-likelihoods and prior rho, in log space.
double flip_posterior(double log_p_original, double log_p_mirror, double rho);

struct EmOptions {
  SketchOptions sketch;
  int iterations = 3;
  std::uint64_t seed = 0;
};

struct FlipState {
  std::vector<double> z_hat;
  double rho = 0.5;
};

struct FlipIteration {
  ActiveBasisTemplate tmpl;  ///< M-step template of this iteration
  std::vector<double> score_original;
  std::vector<double> score_mirror;
  FlipState state;           ///< after the E-step and rho update
  bool degenerate = false;   ///< every image scored both variants equally
};

struct FlipResult {
  ActiveBasisTemplate tmpl;
  FlipState state;
  std::vector<int> assignments;              ///< z_m = 1 iff z_hat > 1/2
  std::vector<DeformedTemplate> deformed;    ///< on the variant picked by z_m
  std::vector<FlipIteration> history;
};

/// Flip-mixture EM over {I_m, mirror(I_m)} with weights (z_hat, 1 - z_hat).
FlipResult em_flip(std::span<const GrayImage> images, const Dictionary& dict,
                   std::shared_ptr<const ReferenceModel> reference, const EmOptions& options);

struct RotationState {
  std::vector<double> angles;
  std::vector<std::vector<double>> weights;  ///< per image, sums to 1
  std::vector<double> priors;                ///< mean weight per rotation
};

struct RotationIteration {
  ActiveBasisTemplate tmpl;
  std::vector<std::vector<double>> scores;  ///< per image, per rotation
  RotationState state;
  bool degenerate = false;
};

struct RotationResult {
  ActiveBasisTemplate tmpl;
  RotationState state;
  std::vector<int> assignments;  ///< arg-max rotation index per image
  std::vector<DeformedTemplate> deformed;
  std::vector<RotationIteration> history;
};

/// Rotation-mixture EM: each image contributes one resampled copy per angle.
RotationResult em_rotate(std::span<const GrayImage> images, const Dictionary& dict,
                         std::shared_ptr<const ReferenceModel> reference, std::span<const double> angles,
                         const EmOptions& options);

struct LocateOptions {
  EmOptions em;
  int lattice_width = 0;
  int lattice_height = 0;
  std::vector<double> factors{1.0};
  bool with_flip = false;  ///< also consider the mirror of every image in the E-step
};

struct Placement {
  bool included = false;
  int x = 0;
  int y = 0;
  double factor = 1.0;
  std::size_t level = 0;
  bool mirrored = false;
  double score = 0.0;

  double base_x() const { return (x + 0.5) / factor - 0.5; }
  double base_y() const { return (y + 0.5) / factor - 0.5; }
};

struct AlignState {
  std::vector<Placement> placements;
};

struct LocateIteration {
  ActiveBasisTemplate tmpl;  ///< template used in this E-step
  AlignState state;
  double total_score = 0.0;  ///< sum of imputed SUM2 scores
};

struct LocateResult {
  ActiveBasisTemplate tmpl;
  AlignState state;
  std::vector<DeformedTemplate> deformed;
  std::vector<LocateIteration> history;
  bool monotone = true;  ///< total imputed score never decreased
};

/// Hard-EM alignment: initialize from a centred crop of image 1 with no
/// perturbations, then alternate detection over the pyramid and supervised
/// shared sketch on the aligned crops.
LocateResult em_locate(std::span<const GrayImage> images, const Dictionary& dict,
                       std::shared_ptr<const ReferenceModel> reference, const LocateOptions& options);

}  // namespace abm
