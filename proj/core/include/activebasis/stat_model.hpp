#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "activebasis/gabor.hpp"
#include "activebasis/image_ops.hpp"

namespace abm {

inline constexpr double kDefaultSaturation = 6.0;

/// h(r) = xi * (2 / (1 + exp(-2 r / xi)) - 1); increases from 0 towards xi.
double saturate(double r, double xi = kDefaultSaturation);

/// Binned density of r = |c|^2. masses sum to 1.
struct RHistogram {
  std::vector<double> edges;   ///< bins + 1 increasing edges
  std::vector<double> masses;  ///< one per bin

  std::vector<double> centers() const;
  bool operator==(const RHistogram&) const = default;
};

struct ExpFamilyTables {
  std::vector<double> log_z;
  std::vector<double> mu;
};

/// log Z(lambda) and mu(lambda) = E_lambda[h(r)] of the tilted family
/// exp(lambda h(r)) q(r) / Z(lambda), over bin centres, in log space.
/// Throws ConfigError for a grid that does not start at 0, is not strictly
/// increasing, or on which mu fails to increase strictly.
ExpFamilyTables compute_tables(std::span<const double> centers, std::span<const double> masses, double xi,
                               std::span<const double> lambda_grid);

/// `steps` equal steps on [0, lambda_max] (steps + 1 points).
std::vector<double> make_lambda_grid(double lambda_max, int steps);

struct ReferenceConfig {
  double xi = kDefaultSaturation;
  int bins = 1000;
  double cap_quantile = 0.999;
  double lambda_max = 10.0;
  int lambda_steps = 400;
};

/// Pooled natural-image reference: r histogram plus the tabulated exponential
/// family. Immutable once built.
struct ReferenceModel {
  RHistogram histogram;
  double xi = kDefaultSaturation;
  std::vector<double> lambda_grid;
  std::vector<double> log_z;
  std::vector<double> mu;
  std::string source;  ///< free-form provenance label

  static ReferenceModel from_histogram(RHistogram histogram, double xi, std::vector<double> lambda_grid,
                                       std::string source = {});

  double lambda_max() const { return lambda_grid.back(); }
  /// Piecewise-linear interpolation of the tables (clamped to the grid).
  double mu_at(double lambda) const;
  double log_z_at(double lambda) const;

  void validate() const;
  bool operator==(const ReferenceModel&) const = default;
};

/// Order-free accumulator of pooled energies; partial pools merge in any order.
class EnergyPool {
 public:
  void add(const ResponseMaps& responses);
  void merge(const EnergyPool& other);
  std::size_t size() const { return values_.size(); }

  /// Equal-width bins on [0, r_cap], r_cap the nearest-rank `cap_quantile`
  /// order statistic; values above the cap land in the last bin.
  RHistogram histogram(int bins, double cap_quantile) const;

 private:
  std::vector<double> values_;
};

/// Normalizes each image, pools r over all valid (x, alpha), then tabulates.
/// Throws ConfigError on an empty set; DegenerateImageError propagates.
ReferenceModel pool_reference(std::span<const GrayImage> images, const Dictionary& dict,
                              const ReferenceConfig& config = {}, std::string source = {});

/// Tilt parameter and its log normalizer for one template element.
struct ElementWeight {
  double lambda = 0.0;
  double log_z = 0.0;

  bool operator==(const ElementWeight&) const = default;
};

/// Inverts mu by piecewise-linear interpolation. Targets at or below mu(0)
/// give lambda = 0; at or above mu(lambda_max) clamp to lambda_max (warned).
ElementWeight solve_lambda(const ReferenceModel& ref, double target);

/// lambda h(r) - log Z(lambda).
double element_score(double r, const ElementWeight& w, const ReferenceModel& ref);

/// Dead-leaves texture images (random occluding discs and bars of random
/// gray levels plus mild noise). Deterministic in `seed`; used as the bundled
/// fallback background when no natural-image corpus is supplied.
std::vector<GrayImage> synthetic_background(int count, int size, std::uint64_t seed);

inline constexpr const char* kSyntheticBackgroundLabel = "bundled synthetic dead-leaves texture (fallback)";

}  // namespace abm
