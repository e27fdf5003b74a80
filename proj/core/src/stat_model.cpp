#include "activebasis/stat_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "activebasis/error.hpp"

namespace abm {

double saturate(double r, double xi) {
  return xi * (2.0 / (1.0 + std::exp(-2.0 * r / xi)) - 1.0);
}

std::vector<double> RHistogram::centers() const {
  std::vector<double> out(masses.size());
  for (std::size_t k = 0; k < masses.size(); ++k) out[k] = 0.5 * (edges[k] + edges[k + 1]);
  return out;
}

ExpFamilyTables compute_tables(std::span<const double> centers, std::span<const double> masses, double xi,
                               std::span<const double> lambda_grid) {
  if (centers.empty() || centers.size() != masses.size()) {
    throw ConfigError("histogram centres and masses must be non-empty and of equal length");
  }
  if (!(xi > 0.0)) throw ConfigError("model.xi must be > 0");
  if (lambda_grid.size() < 2 || lambda_grid.front() != 0.0) {
    throw ConfigError("lambda grid must start at 0 and hold at least two points");
  }
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > lambda_grid[i - 1])) throw ConfigError("lambda grid must be strictly increasing");
  }

  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0)) throw ConfigError("histogram masses must be nonnegative");
    total += m;
  }
  if (!(total > 0.0)) throw ConfigError("histogram has no mass");

  std::vector<double> h(centers.size());
  std::vector<double> log_mass(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    h[k] = saturate(centers[k], xi);
    log_mass[k] = masses[k] > 0.0 ? std::log(masses[k]) : -std::numeric_limits<double>::infinity();
  }

  ExpFamilyTables out;
  out.log_z.resize(lambda_grid.size());
  out.mu.resize(lambda_grid.size());
  std::vector<double> a(centers.size());
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    const double lambda = lambda_grid[i];
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < h.size(); ++k) {
      a[k] = lambda * h[k] + log_mass[k];
      peak = std::max(peak, a[k]);
    }
    double z = 0.0, hz = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (masses[k] <= 0.0) continue;
      const double e = std::exp(a[k] - peak);
      z += e;
      hz += h[k] * e;
    }
    // Z(0) = 1 for a normalized q.
    out.log_z[i] = i == 0 ? 0.0 : peak + std::log(z) - std::log(total);
    out.mu[i] = hz / z;
  }
  for (std::size_t i = 1; i < out.mu.size(); ++i) {
    if (!(out.mu[i] > out.mu[i - 1])) {
      throw ConfigError("mu(lambda) is not strictly increasing on the grid (ill-conditioned histogram or grid)");
    }
  }
  return out;
}

std::vector<double> make_lambda_grid(double lambda_max, int steps) {
  if (!(lambda_max > 0.0) || steps < 1) throw ConfigError("lambda grid needs lambda_max > 0 and steps >= 1");
  std::vector<double> grid(steps + 1);
  for (int i = 0; i <= steps; ++i) grid[i] = lambda_max * i / steps;
  return grid;
}

ReferenceModel ReferenceModel::from_histogram(RHistogram histogram, double xi, std::vector<double> lambda_grid,
                                              std::string source) {
  ReferenceModel ref;
  ref.histogram = std::move(histogram);
  ref.xi = xi;
  ref.lambda_grid = std::move(lambda_grid);
  ref.source = std::move(source);
  if (ref.histogram.edges.size() != ref.histogram.masses.size() + 1) {
    throw ConfigError("histogram needs one more edge than bins");
  }
  auto tables = compute_tables(ref.histogram.centers(), ref.histogram.masses, xi, ref.lambda_grid);
  ref.log_z = std::move(tables.log_z);
  ref.mu = std::move(tables.mu);
  ref.validate();
  return ref;
}

namespace {

// Cell index k and fraction t with grid[k] + t * (grid[k+1] - grid[k]) = value.
std::pair<std::size_t, double> locate(const std::vector<double>& grid, double value) {
  if (value <= grid.front()) return {0, 0.0};
  if (value >= grid.back()) return {grid.size() - 2, 1.0};
  const auto it = std::upper_bound(grid.begin(), grid.end(), value);
  const std::size_t k = static_cast<std::size_t>(it - grid.begin()) - 1;
  return {k, (value - grid[k]) / (grid[k + 1] - grid[k])};
}

double lerp_at(const std::vector<double>& table, std::size_t k, double t) {
  return t == 0.0 ? table[k] : table[k] + t * (table[k + 1] - table[k]);
}

}  // namespace

double ReferenceModel::mu_at(double lambda) const {
  const auto [k, t] = locate(lambda_grid, lambda);
  return lerp_at(mu, k, t);
}

double ReferenceModel::log_z_at(double lambda) const {
  const auto [k, t] = locate(lambda_grid, lambda);
  return lerp_at(log_z, k, t);
}

void ReferenceModel::validate() const {
  const auto& m = histogram.masses;
  if (m.empty() || histogram.edges.size() != m.size() + 1) throw ConfigError("malformed reference histogram");
  double total = 0.0;
  for (double v : m) {
    if (!(v >= 0.0)) throw ConfigError("reference histogram has a negative mass");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("reference histogram masses do not sum to 1");
  for (std::size_t k = 1; k < histogram.edges.size(); ++k) {
    if (!(histogram.edges[k] > histogram.edges[k - 1])) throw ConfigError("histogram edges must increase");
  }
  if (lambda_grid.size() < 2 || lambda_grid.front() != 0.0 || log_z.size() != lambda_grid.size() ||
      mu.size() != lambda_grid.size()) {
    throw ConfigError("malformed lambda tables");
  }
  if (log_z.front() != 0.0) throw ConfigError("log Z(0) must be 0");
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (i > 0 && !(mu[i] > mu[i - 1])) throw ConfigError("mu table must be strictly increasing");
    if (!(mu[i] > 0.0 && mu[i] < xi)) throw ConfigError("mu table must lie in (0, xi)");
  }
}

void EnergyPool::add(const ResponseMaps& responses) {
  const Rect v = responses.valid();
  for (int o = 0; o < responses.orientations(); ++o) {
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) values_.push_back(responses.energy(o, x, y));
    }
  }
}

void EnergyPool::merge(const EnergyPool& other) {
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

RHistogram EnergyPool::histogram(int bins, double cap_quantile) const {
  if (bins < 1) throw ConfigError("model.bins must be >= 1");
  if (!(cap_quantile > 0.0 && cap_quantile <= 1.0)) throw ConfigError("cap quantile must lie in (0, 1]");
  if (values_.empty()) throw ConfigError("no pooled energies");

  const std::size_t n = values_.size();
  std::vector<double> scratch(values_);
  const auto rank = static_cast<std::size_t>(std::ceil(cap_quantile * static_cast<double>(n)));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(scratch.begin(), scratch.begin() + k, scratch.end());
  const double cap = scratch[k];
  if (!(cap > 0.0)) throw DegenerateImageError("pooled energies vanish below the cap quantile");

  const double width = cap / bins;
  std::vector<std::size_t> counts(bins, 0);
  for (double r : values_) {
    const auto b = static_cast<std::size_t>(std::min(r / width, static_cast<double>(bins - 1)));
    ++counts[b];
  }
  RHistogram hist;
  hist.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) hist.edges[b] = b == bins ? cap : width * b;
  hist.masses.resize(bins);
  for (int b = 0; b < bins; ++b) hist.masses[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
  return hist;
}

ReferenceModel pool_reference(std::span<const GrayImage> images, const Dictionary& dict,
                              const ReferenceConfig& config, std::string source) {
  if (images.empty()) throw ConfigError("reference pooling needs at least one image");
  EnergyPool pool;
  for (const GrayImage& image : images) pool.add(prepare_image(image, dict).responses);
  return ReferenceModel::from_histogram(pool.histogram(config.bins, config.cap_quantile), config.xi,
                                        make_lambda_grid(config.lambda_max, config.lambda_steps),
                                        std::move(source));
}

ElementWeight solve_lambda(const ReferenceModel& ref, double target) {
  if (!(target > ref.mu.front())) return {0.0, 0.0};
  if (target >= ref.mu.back()) {
    spdlog::warn("target mean {:.6f} >= mu(lambda_max) = {:.6f}; lambda clamped to {}", target, ref.mu.back(),
                 ref.lambda_max());
    return {ref.lambda_max(), ref.log_z.back()};
  }
  const auto [k, t] = locate(ref.mu, target);
  return {lerp_at(ref.lambda_grid, k, t), lerp_at(ref.log_z, k, t)};
}

double element_score(double r, const ElementWeight& w, const ReferenceModel& ref) {
  return w.lambda * saturate(r, ref.xi) - w.log_z;
}

std::vector<GrayImage> synthetic_background(int count, int size, std::uint64_t seed) {
  if (count < 1 || size < 8) throw ConfigError("synthetic background needs count >= 1 and size >= 8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.02);

  std::vector<GrayImage> out;
  out.reserve(count);
  const int leaves = 6 * size;
  for (int i = 0; i < count; ++i) {
    GrayImage img(size, size, unit(rng));
    for (int leaf = 0; leaf < leaves; ++leaf) {
      const double cx = unit(rng) * size;
      const double cy = unit(rng) * size;
      // Power-law radii between 1.5 px and size / 4.
      const double rmin = 1.5, rmax = size / 4.0;
      const double radius = rmin * std::pow(rmax / rmin, unit(rng));
      const double gray = unit(rng);
      const bool bar = unit(rng) < 0.5;
      const double theta = unit(rng) * kPi;
      const double ct = std::cos(theta), st = std::sin(theta);
      const double aspect = 1.0 + 4.0 * unit(rng);
      const int lo_x = std::max(0, static_cast<int>(cx - radius * aspect) - 1);
      const int hi_x = std::min(size - 1, static_cast<int>(cx + radius * aspect) + 1);
      const int lo_y = std::max(0, static_cast<int>(cy - radius * aspect) - 1);
      const int hi_y = std::min(size - 1, static_cast<int>(cy + radius * aspect) + 1);
      for (int y = lo_y; y <= hi_y; ++y) {
        for (int x = lo_x; x <= hi_x; ++x) {
          const double u = (x - cx) * ct + (y - cy) * st;
          const double v = -(x - cx) * st + (y - cy) * ct;
          const bool inside = bar ? (std::abs(u) <= radius / aspect && std::abs(v) <= radius * aspect)
                                  : (u * u + v * v <= radius * radius);
          if (inside) img.at(x, y) = gray;
        }
      }
    }
    for (double& p : img.pixels) p += noise(rng);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace abm
