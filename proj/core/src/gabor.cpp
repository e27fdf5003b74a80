#include "activebasis/gabor.hpp"

#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "activebasis/error.hpp"

namespace abm {

void GaborParams::validate() const {
  if (length_px < 5 || length_px % 2 == 0) {
    throw ConfigError("gabor.length_px must be odd and >= 5, got " + std::to_string(length_px));
  }
  if (orientations < 2) {
    throw ConfigError("gabor.orientations must be >= 2, got " + std::to_string(orientations));
  }
  if (!(aspect > 1.0) || !std::isfinite(aspect)) {
    throw ConfigError("gabor.aspect must be > 1");
  }
  if (!(sigma1_frac > 0.0) || !std::isfinite(sigma1_frac)) {
    throw ConfigError("gabor.sigma1_frac must be > 0");
  }
  if (!(cycles > 0.0) || !std::isfinite(cycles)) {
    throw ConfigError("gabor.cycles must be > 0");
  }
}

namespace {

// Subtract the mean, then scale to unit norm.
void normalize_component(std::vector<double>& values, const char* name) {
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double sq = 0.0;
  for (double& v : values) {
    v -= mean;
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm < 1e-8) {
    throw ConfigError(std::string("gabor ") + name +
                      " component vanishes on the pixel grid (wave period too short)");
  }
  for (double& v : values) v /= norm;
}

}  // namespace

GaborElement make_gabor(const GaborParams& params, double alpha, double scale) {
  params.validate();
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha >= kPi) {
    throw ConfigError("gabor orientation must lie in [0, pi)");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("gabor scale must be > 0");
  }

  GaborElement e;
  e.length = params.length_px;
  e.orientation = alpha;
  e.scale = scale;
  const int len = params.length_px;
  const int half = params.half();
  e.cosine.resize(static_cast<std::size_t>(len) * len);
  e.sine.resize(e.cosine.size());

  const double s1 = params.sigma1();
  const double s2 = params.sigma2();
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  const double omega = 2.0 * kPi / scale;
  for (int r = 0; r < len; ++r) {
    for (int c = 0; c < len; ++c) {
      const double u = c - half;
      const double v = r - half;
      const double across = u * ca + v * sa;
      const double along = -u * sa + v * ca;
      const double g = std::exp(-0.5 * ((across / s1) * (across / s1) + (along / s2) * (along / s2)));
      e.cosine[r * len + c] = g * std::cos(omega * across);
      e.sine[r * len + c] = g * std::sin(omega * across);
    }
  }
  normalize_component(e.cosine, "cosine");
  normalize_component(e.sine, "sine");
  return e;
}

double correlation(const GaborElement& a, int ax, int ay, const GaborElement& b, int bx, int by) {
  const int ha = a.half();
  const int hb = b.half();
  const int x0 = std::max(ax - ha, bx - hb);
  const int x1 = std::min(ax + ha, bx + hb);
  const int y0 = std::max(ay - ha, by - hb);
  const int y1 = std::min(ay + ha, by + hb);
  if (x0 > x1 || y0 > y1) return 0.0;

  double cc = 0.0, cs = 0.0, sc = 0.0, ss = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double ac = a.cos_at(x - ax, y - ay);
      const double as = a.sin_at(x - ax, y - ay);
      const double bc = b.cos_at(x - bx, y - by);
      const double bs = b.sin_at(x - bx, y - by);
      cc += ac * bc;
      cs += ac * bs;
      sc += as * bc;
      ss += as * bs;
    }
  }
  return cc * cc + cs * cs + sc * sc + ss * ss;
}

CorrelationTable::CorrelationTable(const std::vector<GaborElement>& prototypes)
    : orientations_(static_cast<int>(prototypes.size())),
      reach_(prototypes.empty() ? 0 : prototypes.front().length - 1),
      span_(2 * reach_ + 1) {
  inner_.assign(static_cast<std::size_t>(orientations_) * orientations_ * span_ * span_, {0, 0, 0, 0});
  const int len = reach_ + 1;
  for (int o1 = 0; o1 < orientations_; ++o1) {
    const GaborElement& a = prototypes[o1];
    for (int o2 = 0; o2 < orientations_; ++o2) {
      const GaborElement& b = prototypes[o2];
      for (int dy = -reach_; dy <= reach_; ++dy) {
        for (int dx = -reach_; dx <= reach_; ++dx) {
          // a occupies window [0, len); b occupies [d, d + len).
          const int x0 = std::max(0, dx), x1 = std::min(len, dx + len);
          const int y0 = std::max(0, dy), y1 = std::min(len, dy + len);
          double cc = 0.0, cs = 0.0, sc = 0.0, ss = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* ac = &a.cosine[y * len];
            const double* as = &a.sine[y * len];
            const double* bc = b.cosine.data() + (y - dy) * len;
            const double* bs = b.sine.data() + (y - dy) * len;
            for (int x = x0; x < x1; ++x) {
              cc += ac[x] * bc[x - dx];
              cs += ac[x] * bs[x - dx];
              sc += as[x] * bc[x - dx];
              ss += as[x] * bs[x - dx];
            }
          }
          inner_[slot(o1, o2, dx, dy)] = {cc, cs, sc, ss};
        }
      }
    }
  }
}

std::size_t CorrelationTable::slot(int o1, int o2, int dx, int dy) const {
  return ((static_cast<std::size_t>(o1) * orientations_ + o2) * span_ + (dy + reach_)) * span_ +
         (dx + reach_);
}

const std::array<double, 4>& CorrelationTable::inner(int o1, int o2, int dx, int dy) const {
  return inner_[slot(o1, o2, dx, dy)];
}

double CorrelationTable::corr(int o1, int o2, int dx, int dy) const {
  if (std::abs(dx) > reach_ || std::abs(dy) > reach_) return 0.0;
  const auto& p = inner(o1, o2, dx, dy);
  return p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3];
}

std::vector<CorrelationTable::Offset> CorrelationTable::footprint(int selected, double epsilon) const {
  std::vector<Offset> out;
  for (int o = 0; o < orientations_; ++o) {
    for (int dy = -reach_; dy <= reach_; ++dy) {
      for (int dx = -reach_; dx <= reach_; ++dx) {
        if (corr(selected, o, dx, dy) > epsilon) out.push_back({dx, dy, o});
      }
    }
  }
  return out;
}

struct Dictionary::LazyTable {
  std::once_flag once;
  std::unique_ptr<CorrelationTable> table;
};

Dictionary::Dictionary(GaborParams params, std::optional<double> scale)
    : params_(params),
      scale_(scale.value_or(params.default_scale())),
      table_(std::make_shared<LazyTable>()) {
  params_.validate();
  prototypes_.reserve(params_.orientations);
  for (int o = 0; o < params_.orientations; ++o) {
    prototypes_.push_back(make_gabor(params_, params_.angle(o), scale_));
  }
}

const CorrelationTable& Dictionary::correlations() const {
  std::call_once(table_->once, [this] { table_->table = std::make_unique<CorrelationTable>(prototypes_); });
  return *table_->table;
}

double Dictionary::correlation(const Pose& a, const Pose& b) const {
  return correlations().corr(a.orientation, b.orientation, b.x - a.x, b.y - a.y);
}

}  // namespace abm
