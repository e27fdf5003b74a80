#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace abm {

inline constexpr double kPi = 3.14159265358979323846;

/// Shape of the fixed-scale Gabor pair. Orientation index k maps to k*pi/O.
struct GaborParams {
  int length_px = 17;         ///< odd support side
  int orientations = 15;      ///< O
  double aspect = 2.0;        ///< sigma2 / sigma1
  double sigma1_frac = 0.25;  ///< sigma1 as a fraction of half the support
  double cycles = 2.5;        ///< wave cycles across the support (default period)

  void validate() const;

  int half() const { return length_px / 2; }
  double sigma1() const { return sigma1_frac * 0.5 * length_px; }
  double sigma2() const { return aspect * sigma1(); }
  double default_scale() const { return length_px / cycles; }
  double angle(int orientation) const { return orientation * kPi / orientations; }

  bool operator==(const GaborParams&) const = default;
};

/// One cosine/sine pair on a length x length window centred at the origin.
/// Maps are row-major; offset (dx, dy) from the centre lives at
/// (dy + half) * length + (dx + half).
struct GaborElement {
  int length = 0;
  double orientation = 0.0;
  double scale = 0.0;
  std::vector<double> cosine;
  std::vector<double> sine;

  int half() const { return length / 2; }
  double cos_at(int dx, int dy) const { return cosine[(dy + half()) * length + dx + half()]; }
  double sin_at(int dx, int dy) const { return sine[(dy + half()) * length + dx + half()]; }
};

/// Truncated, rotated Gabor pair; each component is mean-subtracted and then
/// scaled to unit l2 norm. The wave runs along (cos a, sin a) in (column, row)
/// coordinates, i.e. across the bar. Throws ConfigError on invalid input or a
/// component that vanishes on the pixel grid.
GaborElement make_gabor(const GaborParams& params, double alpha, double scale);

/// Lattice pose of an element: centre pixel and orientation index.
struct Pose {
  int x = 0;
  int y = 0;
  int orientation = 0;

  bool operator==(const Pose&) const = default;
};

/// Sum of the four squared inner products between the components of `a`
/// centred at (ax, ay) and `b` centred at (bx, by), over their overlap.
double correlation(const GaborElement& a, int ax, int ay, const GaborElement& b, int bx, int by);

/// Inner products <B1_eta1, B2_eta2> for every orientation pair and every
/// relative offset with |dx|, |dy| < length. Entry order is
/// (cos.cos, cos.sin, sin.cos, sin.sin), with B1 at the origin and B2 at (dx, dy).
class CorrelationTable {
 public:
  struct Offset {
    int dx;
    int dy;
    int orientation;
  };

  CorrelationTable(const std::vector<GaborElement>& prototypes);

  int span() const { return span_; }
  const std::array<double, 4>& inner(int o1, int o2, int dx, int dy) const;
  double corr(int o1, int o2, int dx, int dy) const;

  /// Poses (relative to a selected element of orientation `selected`) whose
  /// correlation with it exceeds `epsilon`.
  std::vector<Offset> footprint(int selected, double epsilon) const;

 private:
  std::size_t slot(int o1, int o2, int dx, int dy) const;

  int orientations_;
  int reach_;  // length - 1
  int span_;   // 2 * reach + 1
  std::vector<std::array<double, 4>> inner_;
};

/// Overcomplete fixed-scale dictionary: one prototype per orientation; any
/// lattice element is a translated prototype. Immutable; copies share the
/// lazily-built correlation table.
class Dictionary {
 public:
  explicit Dictionary(GaborParams params = {}, std::optional<double> scale = std::nullopt);

  const GaborParams& params() const { return params_; }
  double scale() const { return scale_; }
  int orientations() const { return params_.orientations; }
  int length() const { return params_.length_px; }
  int half() const { return params_.half(); }
  double angle(int orientation) const { return params_.angle(orientation); }
  const GaborElement& prototype(int orientation) const { return prototypes_[orientation]; }
  const std::vector<GaborElement>& prototypes() const { return prototypes_; }

  /// Built on first use; safe to call from several threads.
  const CorrelationTable& correlations() const;

  /// corr between two lattice poses of this dictionary.
  double correlation(const Pose& a, const Pose& b) const;

 private:
  struct LazyTable;

  GaborParams params_;
  double scale_;
  std::vector<GaborElement> prototypes_;
  std::shared_ptr<LazyTable> table_;
};

}  // namespace abm
