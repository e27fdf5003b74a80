#include "oracles.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <optional>
#include <tuple>

#include "activebasis/stat_model.hpp"

namespace abm::test {

std::array<GrayImage, 2> embed_element(const Dictionary& dict, int w, int h, int x, int y, int o) {
  std::array<GrayImage, 2> out{GrayImage(w, h), GrayImage(w, h)};
  const GaborElement& g = dict.prototype(o);
  const int half = dict.half();
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const int px = x + dx, py = y + dy;
      if (px < 0 || py < 0 || px >= w || py >= h) continue;
      out[0].at(px, py) = g.cos_at(dx, dy);
      out[1].at(px, py) = g.sin_at(dx, dy);
    }
  }
  return out;
}

double dot(const GrayImage& a, const GrayImage& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += a.pixels[i] * b.pixels[i];
  return s;
}

std::array<double, 2> dense_response(const GrayImage& image, const Dictionary& dict, int x, int y, int o) {
  const auto e = embed_element(dict, image.width, image.height, x, y, o);
  return {dot(image, e[0]), dot(image, e[1])};
}

double dense_correlation(const Dictionary& dict, const Pose& a, const Pose& b) {
  // Canvas large enough for both supports.
  const int pad = dict.length();
  const int x0 = std::min(a.x, b.x) - pad, y0 = std::min(a.y, b.y) - pad;
  const int w = std::abs(a.x - b.x) + 2 * pad + 1, h = std::abs(a.y - b.y) + 2 * pad + 1;
  const auto ea = embed_element(dict, w, h, a.x - x0, a.y - y0, a.orientation);
  const auto eb = embed_element(dict, w, h, b.x - x0, b.y - y0, b.orientation);
  double s = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double v = dot(ea[i], eb[j]);
      s += v * v;
    }
  }
  return s;
}

std::vector<ActivitySet::Member> brute_members(const ActivitySet& act, const Dictionary& dict, int o) {
  std::vector<ActivitySet::Member> out;
  const double step = kPi / dict.orientations();
  const double a = dict.angle(o);
  for (int d = -act.b1; d <= act.b1; ++d) {
    for (int k = -dict.orientations(); k <= dict.orientations(); ++k) {
      if (std::abs(k * step) > act.b2 + 1e-12 || 2 * std::abs(k) > dict.orientations()) continue;
      out.push_back({d, k, static_cast<int>(std::lround(d * std::cos(a))), static_cast<int>(std::lround(d * std::sin(a)))});
    }
  }
  return out;
}

double brute_max1(const ResponseMaps& r, const ActivitySet& act, const Dictionary& dict, double xi, int x, int y,
                  int o) {
  double best = -1.0;
  const int O = dict.orientations();
  for (const auto& m : brute_members(act, dict, o)) {
    const int px = x + m.dx, py = y + m.dy;
    if (!r.is_valid(px, py)) continue;
    best = std::max(best, saturate(r.energy(((o + m.dorient) % O + O) % O, px, py), xi));
  }
  return best;
}

double brute_score(const ResponseMaps& r, const ActiveBasisTemplate& tmpl, const Dictionary& dict, int x, int y) {
  double s = 0.0;
  for (const auto& e : tmpl.elements) {
    const double m = brute_max1(r, tmpl.activity, dict, tmpl.reference->xi, x + e.x - tmpl.center_x(),
                                y + e.y - tmpl.center_y(), e.orientation);
    s += e.weight.lambda * m - e.weight.log_z;
  }
  return s;
}

namespace {

// Activity with the largest energy; ties by |d|, |dorient|, d, dorient.
struct Pick {
  int x, y, o, d, k;
  double e;
};

bool better(const Pick& a, const Pick& b) {
  if (a.e != b.e) return a.e > b.e;
  const auto key = [](const Pick& p) { return std::make_tuple(std::abs(p.d), std::abs(p.k), p.d, p.k); };
  return key(a) < key(b);
}

}  // namespace

std::vector<OracleStep> brute_shared_sketch(std::vector<ResponseMaps> maps, const std::vector<double>& weights,
                                            const Dictionary& dict, const ActivitySet& act, double epsilon, int n,
                                            double xi) {
  std::vector<OracleStep> steps;
  const int O = dict.orientations();
  const int W = maps.front().width(), H = maps.front().height();
  for (int step = 0; step < n; ++step) {
    double best = -std::numeric_limits<double>::infinity();
    Pose pose;
    std::vector<Pose> tied;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (!maps.front().is_valid(x, y)) continue;
        for (int o = 0; o < O; ++o) {
          double index = 0.0;
          for (std::size_t k = 0; k < maps.size(); ++k) {
            const double m = brute_max1(maps[k], act, dict, xi, x, y, o);
            index += weights[k] * std::max(m, 0.0);
          }
          if (index > best) {
            best = index;
            pose = {x, y, o};
            tied.assign(1, pose);
          } else if (index == best) {
            tied.push_back({x, y, o});
          }
        }
      }
    }
    // Exact ties: raw energy at the pose, then raw energy pooled over the activity set.
    std::pair<double, double> top{-std::numeric_limits<double>::infinity(), 0.0};
    for (const Pose& t : tied) {
      std::pair<double, double> key{0.0, 0.0};
      for (std::size_t k = 0; k < maps.size(); ++k) {
        key.first += weights[k] * maps[k].energy(t.orientation, t.x, t.y);
        double pooled = 0.0;
        for (const auto& m : brute_members(act, dict, t.orientation)) {
          const int px = t.x + m.dx, py = t.y + m.dy;
          if (!maps[k].is_valid(px, py)) continue;
          pooled = std::max(pooled, maps[k].energy(((t.orientation + m.dorient) % O + O) % O, px, py));
        }
        key.second += weights[k] * pooled;
      }
      if (key > top) {
        top = key;
        pose = t;
      }
    }
    if (!(best > 0.0)) break;
    steps.push_back({pose, best});
    for (auto& r : maps) {
      std::optional<Pick> pick;
      for (const auto& m : brute_members(act, dict, pose.orientation)) {
        const int px = pose.x + m.dx, py = pose.y + m.dy;
        if (!r.is_valid(px, py)) continue;
        const int o = ((pose.orientation + m.dorient) % O + O) % O;
        const Pick p{px, py, o, m.d, m.dorient, r.energy(o, px, py)};
        if (!pick || better(p, *pick)) pick = p;
      }
      if (!pick) continue;
      const Pose sel{pick->x, pick->y, pick->o};
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          if (!r.is_valid(x, y) || std::abs(x - sel.x) >= dict.length() || std::abs(y - sel.y) >= dict.length()) continue;
          for (int o = 0; o < O; ++o) {
            if (dense_correlation(dict, {x, y, o}, sel) > epsilon) r.zero(o, x, y);
          }
        }
      }
    }
  }
  return steps;
}

}  // namespace abm::test
