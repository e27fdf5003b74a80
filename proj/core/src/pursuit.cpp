#include "activebasis/pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include <spdlog/spdlog.h>

#include "activebasis/error.hpp"

namespace abm {

int ActivitySet::max_orientation_step(const Dictionary& dict) const {
  const double step = kPi / dict.orientations();
  return static_cast<int>(std::floor(b2 / step + 1e-9));
}

std::vector<ActivitySet::Member> ActivitySet::members(const Dictionary& dict, int o) const {
  if (b1 < 0 || b2 < 0.0) throw ConfigError("activity bounds must be nonnegative");
  const int steps = std::min(max_orientation_step(dict), dict.orientations() / 2);
  const double alpha = dict.angle(o);
  std::vector<Member> out;
  for (int d = -b1; d <= b1; ++d) {
    const int dx = static_cast<int>(std::lround(d * std::cos(alpha)));
    const int dy = static_cast<int>(std::lround(d * std::sin(alpha)));
    for (int k = -steps; k <= steps; ++k) out.push_back({d, k, dx, dy});
  }
  std::stable_sort(out.begin(), out.end(), [](const Member& a, const Member& b) {
    return std::make_tuple(std::abs(a.d), std::abs(a.dorient), a.d, a.dorient) <
           std::make_tuple(std::abs(b.d), std::abs(b.dorient), b.d, b.dorient);
  });
  return out;
}

ActivityTable activity_table(const ActivitySet& act, const Dictionary& dict) {
  ActivityTable table(dict.orientations());
  for (int o = 0; o < dict.orientations(); ++o) table[o] = act.members(dict, o);
  return table;
}

ActiveBasisTemplate ActiveBasisTemplate::prefix(std::size_t count) const {
  ActiveBasisTemplate out = *this;
  out.elements.resize(std::min(count, elements.size()));
  return out;
}

double recompute_score(const ActiveBasisTemplate& tmpl, const DeformedTemplate& deformed) {
  double score = 0.0;
  for (std::size_t i = 0; i < deformed.elements.size(); ++i) {
    score += element_score(deformed.elements[i].energy, tmpl.elements[i].weight, *tmpl.reference);
  }
  return score;
}

Activity retrieve_activity(const ResponseMaps& responses, const Pose& nominal,
                           const std::vector<ActivitySet::Member>& members, int orientations) {
  std::optional<Activity> best;
  for (const auto& m : members) {
    const int x = nominal.x + m.dx;
    const int y = nominal.y + m.dy;
    if (!responses.is_valid(x, y)) continue;
    const int o = wrap_orientation(nominal.orientation + m.dorient, orientations);
    const double e = responses.energy(o, x, y);
    if (!best || e > best->energy) {
      best = Activity{m.d, m.dorient, {x, y, o}, responses.cos_resp(o, x, y), responses.sin_resp(o, x, y), e};
    }
  }
  if (!best) {
    throw MarginError("no valid activity around (" + std::to_string(nominal.x) + ", " +
                      std::to_string(nominal.y) + ")");
  }
  return *best;
}

Activity retrieve_activity(const ResponseMaps& responses, const Pose& nominal, const ActivitySet& act,
                           const Dictionary& dict) {
  return retrieve_activity(responses, nominal, act.members(dict, nominal.orientation), dict.orientations());
}

namespace {

Rect reach_rect(const Pose& p, int reach) { return {p.x - reach, p.y - reach, p.x + reach + 1, p.y + reach + 1}; }

Rect inhibit_with(ResponseMaps& responses, const Pose& selected,
                  const std::vector<CorrelationTable::Offset>& footprint) {
  for (const auto& off : footprint) {
    const int x = selected.x + off.dx;
    const int y = selected.y + off.dy;
    if (responses.is_valid(x, y)) responses.zero(off.orientation, x, y);
  }
  return reach_rect(selected, responses.margin() * 2).intersect(responses.valid());
}

}  // namespace

Rect inhibit(ResponseMaps& responses, const Pose& selected, double epsilon, const Dictionary& dict) {
  return inhibit_with(responses, selected, dict.correlations().footprint(selected.orientation, epsilon));
}

Rect subtract_projection(ResponseMaps& responses, const Pose& selected, double cos_coef, double sin_coef,
                         const Dictionary& dict) {
  const CorrelationTable& table = dict.correlations();
  const int reach = dict.length() - 1;
  const Rect touched = reach_rect(selected, reach).intersect(responses.valid());
  for (int o = 0; o < dict.orientations(); ++o) {
    for (int y = touched.y0; y < touched.y1; ++y) {
      for (int x = touched.x0; x < touched.x1; ++x) {
        // Entries: <sel_c, x_c>, <sel_c, x_s>, <sel_s, x_c>, <sel_s, x_s>.
        const auto& p = table.inner(selected.orientation, o, x - selected.x, y - selected.y);
        const double c = responses.cos_resp(o, x, y) - (cos_coef * p[0] + sin_coef * p[2]);
        const double s = responses.sin_resp(o, x, y) - (cos_coef * p[1] + sin_coef * p[3]);
        responses.set(o, x, y, c, s);
      }
    }
  }
  return touched;
}

namespace {

// Working state of one image inside the shared sketch.
struct SketchImage {
  ResponseMaps maps;
  double weight = 1.0;
  std::vector<double> sum1;  // transformed energy
  std::vector<double> max1;  // pooled over A(alpha)
};

class SketchState {
 public:
  SketchState(std::vector<WeightedImage> images, const Dictionary& dict, const SketchOptions& options,
              double xi)
      : dict_(dict), options_(options), xi_(xi), table_(activity_table(options.activity, dict)) {
    if (images.empty()) throw ConfigError("shared sketch needs at least one image");
    width_ = images.front().responses.width();
    height_ = images.front().responses.height();
    for (const auto& im : images) {
      if (im.responses.width() != width_ || im.responses.height() != height_ ||
          im.responses.orientations() != dict.orientations()) {
        throw SizeError("shared sketch images must share one lattice and orientation count");
      }
      if (!(im.weight >= 0.0)) throw ConfigError("image weights must be nonnegative");
    }
    for (const auto& members : table_) {
      for (const auto& m : members) reach_ = std::max({reach_, std::abs(m.dx), std::abs(m.dy)});
    }
    const std::size_t n = static_cast<std::size_t>(width_) * height_ * dict.orientations();
    for (auto& im : images) {
      SketchImage s{std::move(im.responses), im.weight, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
      images_.push_back(std::move(s));
    }
    index_.assign(n, 0.0);
    const Rect all{0, 0, width_, height_};
    for (auto& im : images_) {
      refresh_sum1(im, all);
      refresh_max1(im, all);
    }
    refresh_index(all);
  }

  std::size_t count() const { return images_.size(); }
  SketchImage& image(std::size_t k) { return images_[k]; }
  const std::vector<ActivitySet::Member>& members(int o) const { return table_[o]; }

  // Row-major over x, then orientation. Exact ties (h rounds to xi once
  // energies are large) go to the larger weighted raw pooled energy, then to
  // the first in scan order.
  std::optional<SketchStep> select() const {
    std::optional<SketchStep> best;
    std::vector<Pose> tied;
    const Rect v = images_.front().maps.valid();
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) {
        for (int o = 0; o < dict_.orientations(); ++o) {
          const double value = index_[at(o, x, y)];
          if (!best || value > best->index) {
            best = SketchStep{{x, y, o}, value};
            tied.assign(1, best->pose);
          } else if (value == best->index) {
            tied.push_back({x, y, o});
          }
        }
      }
    }
    if (tied.size() > 1) {
      std::pair<double, double> top{-std::numeric_limits<double>::infinity(), 0.0};
      for (const Pose& p : tied) {
        const auto raw = raw_index(p);
        if (raw > top) {
          top = raw;
          best->pose = p;
        }
      }
    }
    return best;
  }

  void update(SketchImage& im, const Activity& act) {
    Rect touched;
    if (options_.update == ResponseUpdate::kZero) {
      touched = inhibit_with(im.maps, act.pose, footprint(act.pose.orientation));
    } else {
      touched = subtract_projection(im.maps, act.pose, act.cos_coef, act.sin_coef, dict_);
    }
    refresh_sum1(im, touched);
    const Rect pooled = touched.grow(reach_);
    refresh_max1(im, pooled);
    dirty_ = dirty_.unite(pooled);
  }

  void flush() {
    refresh_index(dirty_);
    dirty_ = {};
  }

 private:
  std::size_t at(int o, int x, int y) const {
    return (static_cast<std::size_t>(o) * height_ + y) * width_ + x;
  }

  const std::vector<CorrelationTable::Offset>& footprint(int o) {
    if (footprints_.empty()) footprints_.resize(dict_.orientations());
    if (!footprints_[o]) footprints_[o] = dict_.correlations().footprint(o, options_.epsilon);
    return *footprints_[o];
  }

  // Tie key: weighted raw energy at the pose itself, then weighted raw pooled energy.
  std::pair<double, double> raw_index(const Pose& p) const {
    const int num_o = dict_.orientations();
    std::pair<double, double> sum{0.0, 0.0};
    for (const auto& im : images_) {
      double best = 0.0;
      for (const auto& m : table_[p.orientation]) {
        const int xx = p.x + m.dx, yy = p.y + m.dy;
        if (im.maps.is_valid(xx, yy)) best = std::max(best, im.maps.energy(wrap_orientation(p.orientation + m.dorient, num_o), xx, yy));
      }
      sum.second += im.weight * best;
      sum.first += im.weight * im.maps.energy(p.orientation, p.x, p.y);
    }
    return sum;
  }

  void refresh_sum1(SketchImage& im, const Rect& r) {
    const Rect v = r.intersect(im.maps.valid());
    for (int o = 0; o < dict_.orientations(); ++o) {
      for (int y = v.y0; y < v.y1; ++y) {
        for (int x = v.x0; x < v.x1; ++x) {
          const double e = im.maps.energy(o, x, y);
          im.sum1[at(o, x, y)] = options_.saturate ? saturate(e, xi_) : e;
        }
      }
    }
  }

  void refresh_max1(SketchImage& im, const Rect& r) {
    const Rect v = r.intersect(im.maps.valid());
    const int num_o = dict_.orientations();
    for (int o = 0; o < num_o; ++o) {
      for (int y = v.y0; y < v.y1; ++y) {
        for (int x = v.x0; x < v.x1; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          for (const auto& m : table_[o]) {
            const int xx = x + m.dx, yy = y + m.dy;
            if (!im.maps.is_valid(xx, yy)) continue;
            best = std::max(best, im.sum1[at(wrap_orientation(o + m.dorient, num_o), xx, yy)]);
          }
          im.max1[at(o, x, y)] = best;
        }
      }
    }
  }

  void refresh_index(const Rect& r) {
    const Rect v = r.intersect(images_.front().maps.valid());
    for (int o = 0; o < dict_.orientations(); ++o) {
      for (int y = v.y0; y < v.y1; ++y) {
        for (int x = v.x0; x < v.x1; ++x) {
          const std::size_t i = at(o, x, y);
          double sum = 0.0;
          for (const auto& im : images_) sum += im.weight * im.max1[i];
          index_[i] = sum;
        }
      }
    }
  }

  const Dictionary& dict_;
  const SketchOptions& options_;
  double xi_;
  ActivityTable table_;
  int width_ = 0;
  int height_ = 0;
  int reach_ = 0;
  std::vector<SketchImage> images_;
  std::vector<double> index_;
  Rect dirty_;
  std::vector<std::optional<std::vector<CorrelationTable::Offset>>> footprints_;
};

}  // namespace

SketchResult shared_sketch(std::vector<WeightedImage> images, const Dictionary& dict,
                           std::shared_ptr<const ReferenceModel> reference, const SketchOptions& options) {
  if (!reference) throw ConfigError("shared sketch needs a reference model");
  if (options.n < 0) throw ConfigError("element count must be >= 0");
  if (!(options.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");

  SketchResult result;
  result.tmpl.width = images.empty() ? 0 : images.front().responses.width();
  result.tmpl.height = images.empty() ? 0 : images.front().responses.height();
  result.tmpl.gabor = dict.params();
  result.tmpl.scale = dict.scale();
  result.tmpl.activity = options.activity;
  result.tmpl.reference = reference;

  SketchState state(std::move(images), dict, options, reference->xi);
  const std::size_t count = state.count();
  double total_weight = 0.0;
  for (std::size_t k = 0; k < count; ++k) total_weight += state.image(k).weight;

  result.deformed.resize(count);
  result.scores.assign(count, 0.0);
  for (std::size_t k = 0; k < count; ++k) result.deformed[k].image = static_cast<int>(k);

  std::vector<Activity> acts(count);
  for (int i = 0; i < options.n; ++i) {
    const auto step = state.select();
    if (!step || !(step->index > 0.0)) {
      spdlog::warn("shared sketch exhausted the responses after {} of {} elements", i, options.n);
      result.exhausted = true;
      break;
    }
    const auto& members = state.members(step->pose.orientation);
    double weighted_h = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      acts[k] = retrieve_activity(state.image(k).maps, step->pose, members, dict.orientations());
      weighted_h += state.image(k).weight * saturate(acts[k].energy, reference->xi);
    }
    const ElementWeight weight =
        total_weight > 0.0 ? solve_lambda(*reference, weighted_h / total_weight) : ElementWeight{};

    result.tmpl.elements.push_back({step->pose.x, step->pose.y, step->pose.orientation, weight, step->index});
    result.steps.push_back(*step);
    for (std::size_t k = 0; k < count; ++k) {
      result.deformed[k].elements.push_back(acts[k]);
      result.scores[k] += element_score(acts[k].energy, weight, *reference);
      state.update(state.image(k), acts[k]);
    }
    state.flush();
  }
  for (std::size_t k = 0; k < count; ++k) result.deformed[k].score = result.scores[k];
  return result;
}

namespace {

double project(const GrayImage& image, const GaborElement& g, int cx, int cy, bool sine) {
  const int half = g.half();
  const std::vector<double>& kernel = sine ? g.sine : g.cosine;
  double sum = 0.0;
  for (int ky = 0; ky < g.length; ++ky) {
    const double* row = image.pixels.data() + static_cast<std::size_t>(cy - half + ky) * image.width;
    for (int kx = 0; kx < g.length; ++kx) sum += kernel[ky * g.length + kx] * row[cx - half + kx];
  }
  return sum;
}

}  // namespace

MatchingPursuitResult matching_pursuit(const GrayImage& image, const Dictionary& dict, int n) {
  if (n < 1) throw ConfigError("matching pursuit needs n >= 1");
  ResponseMaps maps = compute_responses(image, dict);
  const Rect v = maps.valid();
  const long long available = static_cast<long long>(v.x1 - v.x0) * (v.y1 - v.y0) * dict.orientations();
  if (n > available) {
    throw SizeError("matching pursuit asked for " + std::to_string(n) + " elements but only " +
                    std::to_string(available) + " lattice elements are valid");
  }

  MatchingPursuitResult out;
  out.residual = image;
  const int half = dict.half();
  const int reach = dict.length() - 1;
  for (int i = 0; i < n; ++i) {
    Pose best{v.x0, v.y0, 0};
    double best_e = -1.0;
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) {
        for (int o = 0; o < dict.orientations(); ++o) {
          const double e = maps.energy(o, x, y);
          if (e > best_e) {
            best_e = e;
            best = {x, y, o};
          }
        }
      }
    }
    const double c = maps.cos_resp(best.orientation, best.x, best.y);
    const double s = maps.sin_resp(best.orientation, best.x, best.y);
    out.elements.push_back(best);
    out.coefficients.push_back({c, s});

    const GaborElement& g = dict.prototype(best.orientation);
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        out.residual.at(best.x + dx, best.y + dy) -= c * g.cos_at(dx, dy) + s * g.sin_at(dx, dy);
      }
    }
    const Rect touched = reach_rect(best, reach).intersect(v);
    for (int o = 0; o < dict.orientations(); ++o) {
      const GaborElement& p = dict.prototype(o);
      for (int y = touched.y0; y < touched.y1; ++y) {
        for (int x = touched.x0; x < touched.x1; ++x) {
          maps.set(o, x, y, project(out.residual, p, x, y, false), project(out.residual, p, x, y, true));
        }
      }
    }
  }
  return out;
}

}  // namespace abm
