#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "activebasis/detection.hpp"
#include "activebasis/em_learning.hpp"
#include "activebasis/error.hpp"
#include "activebasis/persistence.hpp"
#include "activebasis/sketch.hpp"

namespace abm::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> n;
  std::optional<double> resize;
  std::string background;
  std::string reference;
};

struct Corpus {
  std::vector<std::string> names;
  std::vector<GrayImage> images;
};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw UsageError("corpus directory " + dir.string() + " holds no images");
  return files;
}

Corpus load_corpus(const fs::path& dir, const RunConfig& config) {
  Corpus c;
  for (const auto& p : list_images(dir)) {
    GrayImage im = load_gray(p, config.luma);
    if (config.resize != 1.0) im = resample(im, config.resize);
    c.names.push_back(p.filename().string());
    c.images.push_back(std::move(im));
  }
  return c;
}

// Drops images whose contrast normalization fails.
void drop_degenerate(Corpus& corpus, const Dictionary& dict, std::ostream& err) {
  Corpus kept;
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    try {
      (void)prepare_image(corpus.images[i], dict);
    } catch (const DegenerateImageError& e) {
      err << "warning: skipping " << corpus.names[i] << ": " << e.what() << "\n";
      continue;
    }
    kept.names.push_back(corpus.names[i]);
    kept.images.push_back(std::move(corpus.images[i]));
  }
  if (kept.images.empty()) throw DegenerateImageError("every corpus image is degenerate");
  corpus = std::move(kept);
}

void require_common_size(const Corpus& corpus) {
  for (const auto& im : corpus.images) {
    if (im.width != corpus.images.front().width || im.height != corpus.images.front().height) {
      throw SizeError("aligned corpus images must share one size");
    }
  }
}

std::shared_ptr<const ReferenceModel> reference_for(const Globals& g, const RunConfig& config,
                                                   const Dictionary& dict) {
  if (!g.reference.empty()) {
    ReferenceModel ref = load_reference(g.reference);
    if (ref.xi != config.model.xi) throw ConfigError("reference model was built with a different xi");
    return std::make_shared<const ReferenceModel>(std::move(ref));
  }
  if (!g.background.empty()) {
    RunConfig plain = config;
    plain.resize = 1.0;
    const Corpus bg = load_corpus(g.background, plain);
    return std::make_shared<const ReferenceModel>(
        pool_reference(bg.images, dict, config.model, "background corpus: " + fs::path(g.background).filename().string()));
  }
  return std::make_shared<const ReferenceModel>(
      pool_reference(synthetic_background(16, 128, 0), dict, config.model, kSyntheticBackgroundLabel));
}

std::map<std::string, std::string> png_text(const std::string& hash) { return {{"config_hash", hash}}; }

std::string numbered(const std::string& stem, std::size_t i, const char* ext = ".png") {
  std::ostringstream s;
  s << stem << std::setw(3) << std::setfill('0') << i << ext;
  return s.str();
}

ordered_json activities_json(const DeformedTemplate& d) {
  ordered_json a = ordered_json::array();
  for (const auto& e : d.elements) a.push_back({{"x", e.pose.x}, {"y", e.pose.y}, {"orientation", e.pose.orientation},
                                                 {"d", e.d}, {"dorient", e.dorient}, {"energy", e.energy}});
  return a;
}

void emit(std::ostream& out, const ordered_json& record) { out << record.dump() << std::endl; }

struct Run {
  Globals globals;
  RunConfig config;
  std::string hash;
  fs::path out;
};

Run start(const Globals& g) {
  Run r;
  r.globals = g;
  if (!g.config_path.empty()) r.config = load_config(g.config_path);
  if (g.seed) r.config.seed = *g.seed;
  if (g.n) r.config.n = *g.n;
  if (g.resize) r.config.resize = *g.resize;
  r.config.validate();
  r.hash = config_hash(r.config);
  r.out = g.out_dir;
  fs::create_directories(r.out);
  return r;
}

Provenance provenance(const Run& r, const std::vector<std::string>& corpus) {
  return {r.hash, config_to_string(r.config), corpus};
}

int cmd_learn(const Run& r, const std::string& corpus_dir, std::ostream& out, std::ostream& err) {
  const Dictionary dict = r.config.dictionary();
  Corpus corpus = load_corpus(corpus_dir, r.config);
  drop_degenerate(corpus, dict, err);
  require_common_size(corpus);
  auto ref = reference_for(r.globals, r.config, dict);

  std::vector<WeightedImage> weighted;
  for (const auto& im : corpus.images) weighted.push_back({prepare_image(im, dict).responses, 1.0});
  const SketchResult res = shared_sketch(std::move(weighted), dict, ref, r.config.sketch_options());
  const int w = res.tmpl.width, h = res.tmpl.height;

  save_template(r.out / "template.json", res.tmpl, provenance(r, corpus.names));
  const auto text = png_text(r.hash);
  write_png(r.out / "sketch.png", render_sketch(res.tmpl, w, h), text);
  fs::create_directories(r.out / "steps");
  for (std::size_t k = 1; k <= res.tmpl.size(); ++k) {
    write_png(r.out / "steps" / numbered("step_", k), render_sketch(res.tmpl.prefix(k), w, h), text);
  }
  fs::create_directories(r.out / "deformed");
  for (std::size_t m = 0; m < res.deformed.size(); ++m) {
    write_png(r.out / "deformed" / numbered("deformed_", m), render_deformed(res.tmpl, res.deformed[m], w, h), text);
  }

  ordered_json rec{{"event", "learn"}, {"config_hash", r.hash}, {"images", corpus.names.size()},
                   {"elements", res.tmpl.size()}, {"exhausted", res.exhausted}, {"reference", ref->source}};
  emit(out, rec);
  for (std::size_t m = 0; m < res.scores.size(); ++m) {
    emit(out, {{"event", "image"}, {"name", corpus.names[m]}, {"score", res.scores[m]}});
  }
  return kExitOk;
}

// Optional ground truth: {"file name": label} with label an int, or {"x": .., "y": ..}.
std::optional<ordered_json> load_truth(const std::string& path) {
  if (path.empty()) return std::nullopt;
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed truth file: " + std::string(e.what()));
  }
}

// Flip labels: the learned template may come out mirrored, so a global swap is allowed.
double flip_accuracy(const std::vector<int>& got, const std::vector<int>& truth) {
  int hit = 0;
  for (std::size_t i = 0; i < got.size(); ++i) hit += got[i] == truth[i] ? 1 : 0;
  const double acc = static_cast<double>(hit) / got.size();
  return std::max(acc, 1.0 - acc);
}

// Rotation labels index the angle set. Undoing a planted rotation of index t
// with index g means g + t is the same for every image when the recovered
// template's own rotation is arbitrary; score the most common sum.
double rotate_accuracy(const std::vector<int>& got, const std::vector<int>& truth) {
  std::map<int, int> sums;
  for (std::size_t i = 0; i < got.size(); ++i) ++sums[got[i] + truth[i]];
  int best = 0;
  for (const auto& [sum, count] : sums) best = std::max(best, count);
  return static_cast<double>(best) / got.size();
}

void write_iteration_sketches(const Run& r, const std::vector<ActiveBasisTemplate>& history) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    write_png(r.out / numbered("iteration_", i + 1), render_sketch(history[i], history[i].width, history[i].height),
              png_text(r.hash));
  }
}

int cmd_learn_em(const Run& r, const std::string& mode, const std::string& corpus_dir, const std::string& truth_path,
                 std::ostream& out, std::ostream& err) {
  const Dictionary dict = r.config.dictionary();
  Corpus corpus = load_corpus(corpus_dir, r.config);
  drop_degenerate(corpus, dict, err);
  auto ref = reference_for(r.globals, r.config, dict);
  const auto truth = load_truth(truth_path);
  const auto text = png_text(r.hash);
  EmOptions em;
  em.sketch = r.config.sketch_options();
  em.seed = r.config.seed;

  ActiveBasisTemplate final_tmpl;
  std::vector<DeformedTemplate> deformed;
  std::vector<std::pair<int, int>> canvas;
  if (mode == "flip" || mode == "rotate") {
    require_common_size(corpus);
    std::vector<int> assignments;
    std::vector<ActiveBasisTemplate> templates;
    if (mode == "flip") {
      em.iterations = r.config.iterations_flip;
      const FlipResult res = em_flip(corpus.images, dict, ref, em);
      for (std::size_t it = 0; it < res.history.size(); ++it) {
        const auto& h = res.history[it];
        templates.push_back(h.tmpl);
        emit(out, {{"event", "iteration"}, {"mode", "flip"}, {"iteration", it + 1}, {"rho", h.state.rho},
                   {"z_hat", h.state.z_hat}, {"degenerate", h.degenerate}});
      }
      final_tmpl = res.tmpl;
      assignments = res.assignments;
      deformed = res.deformed;
    } else {
      em.iterations = r.config.iterations_rotate;
      const RotationResult res = em_rotate(corpus.images, dict, ref, r.config.rotations, em);
      for (std::size_t it = 0; it < res.history.size(); ++it) {
        const auto& h = res.history[it];
        templates.push_back(h.tmpl);
        emit(out, {{"event", "iteration"}, {"mode", "rotate"}, {"iteration", it + 1}, {"priors", h.state.priors},
                   {"weights", h.state.weights}, {"degenerate", h.degenerate}});
      }
      final_tmpl = res.tmpl;
      assignments = res.assignments;
      deformed = res.deformed;
    }
    write_iteration_sketches(r, templates);
    for (std::size_t m = 0; m < corpus.names.size(); ++m) {
      emit(out, {{"event", "assignment"}, {"name", corpus.names[m]}, {"label", assignments[m]}});
    }
    if (truth) {
      std::vector<int> t;
      for (const auto& name : corpus.names) t.push_back(truth->at(name).get<int>());
      emit(out, {{"event", "accuracy"}, {"mode", mode}, {"accuracy", mode == "flip" ? flip_accuracy(assignments, t) : rotate_accuracy(assignments, t)}});
    }
  } else if (mode == "locate") {
    if (r.config.lattice_width < 1 || r.config.lattice_height < 1) {
      throw UsageError("locate mode needs em.lattice_width and em.lattice_height in the config");
    }
    LocateOptions opt;
    opt.em = em;
    opt.em.iterations = r.config.iterations_locate;
    opt.lattice_width = r.config.lattice_width;
    opt.lattice_height = r.config.lattice_height;
    opt.factors = r.config.factors;
    opt.with_flip = r.config.locate_with_flip;
    const LocateResult res = em_locate(corpus.images, dict, ref, opt);
    std::vector<ActiveBasisTemplate> templates;
    for (std::size_t it = 0; it < res.history.size(); ++it) {
      const auto& h = res.history[it];
      templates.push_back(h.tmpl);
      ordered_json placements = ordered_json::array();
      for (const auto& p : h.state.placements) {
        placements.push_back({{"included", p.included}, {"x", p.x}, {"y", p.y}, {"factor", p.factor},
                              {"base_x", p.base_x()}, {"base_y", p.base_y()}, {"mirrored", p.mirrored},
                              {"score", p.score}});
      }
      emit(out, {{"event", "iteration"}, {"mode", "locate"}, {"iteration", it + 1},
                 {"total_score", h.total_score}, {"placements", placements}});
    }
    templates.push_back(res.tmpl);
    write_iteration_sketches(r, templates);
    final_tmpl = res.tmpl;
    deformed = res.deformed;
    emit(out, {{"event", "monotone"}, {"monotone", res.monotone}});
    if (truth) {
      // Offsets compared up to a global translation fixed by the first image.
      const auto& pl = res.state.placements;
      const auto& t0 = truth->at(corpus.names.front());
      const double ox = pl.front().base_x() - t0.at("x").get<double>();
      const double oy = pl.front().base_y() - t0.at("y").get<double>();
      int hit = 0;
      for (std::size_t m = 0; m < pl.size(); ++m) {
        const auto& t = truth->at(corpus.names[m]);
        if (pl[m].included && std::abs(pl[m].base_x() - ox - t.at("x").get<double>()) <= r.config.activity.b1 &&
            std::abs(pl[m].base_y() - oy - t.at("y").get<double>()) <= r.config.activity.b1) {
          ++hit;
        }
      }
      emit(out, {{"event", "accuracy"}, {"mode", "locate"},
                 {"accuracy", static_cast<double>(hit) / static_cast<double>(pl.size())}});
    }
  } else {
    throw UsageError("unknown mode " + mode);
  }

  save_template(r.out / "template.json", final_tmpl, provenance(r, corpus.names));
  write_png(r.out / "sketch.png", render_sketch(final_tmpl, final_tmpl.width, final_tmpl.height), text);
  fs::create_directories(r.out / "deformed");
  for (const auto& d : deformed) {
    write_png(r.out / "deformed" / numbered("deformed_", static_cast<std::size_t>(d.image)),
              render_deformed(final_tmpl, d, final_tmpl.width, final_tmpl.height), text);
  }
  emit(out, {{"event", "learn-em"}, {"mode", mode}, {"config_hash", r.hash}, {"images", corpus.names.size()},
             {"elements", final_tmpl.size()}});
  return kExitOk;
}

int cmd_detect(const Run& r, const std::string& template_path, const std::string& image_path,
               const std::string& dump_path, std::ostream& out) {
  const TemplateFile file = load_template(template_path);
  const Dictionary dict = dictionary_for(file.tmpl);
  const GrayImage image = load_gray(image_path, r.config.luma);
  const auto levels = prepare_pyramid(image, dict, r.config.factors);
  const Detection d = detect(levels, file.tmpl, dict);
  if (!dump_path.empty()) dump_responses(dump_path, levels[d.level].responses);
  write_png(r.out / "overlay.png", render_overlay(image, file.tmpl, d), png_text(r.hash));
  emit(out, {{"event", "detect"}, {"image", fs::path(image_path).filename().string()}, {"x", d.x}, {"y", d.y},
             {"factor", d.factor}, {"base_x", d.base_x()}, {"base_y", d.base_y()}, {"score", d.score},
             {"recomputed_score", recompute_score(file.tmpl, d.deformed)}, {"activities", activities_json(d.deformed)}});
  return kExitOk;
}

int cmd_render(const Run& r, const std::string& template_path, int width, int height, std::ostream& out) {
  const TemplateFile file = load_template(template_path);
  const int w = width > 0 ? width : file.tmpl.width;
  const int h = height > 0 ? height : file.tmpl.height;
  write_png(r.out / "sketch.png", render_sketch(file.tmpl, w, h), png_text(file.provenance.config_hash));
  emit(out, {{"event", "render"}, {"width", w}, {"height", h}, {"elements", file.tmpl.size()}});
  return kExitOk;
}

int cmd_pool(const Run& r, const std::string& dir, std::ostream& out) {
  const Dictionary dict = r.config.dictionary();
  RunConfig plain = r.config;
  plain.resize = 1.0;
  const Corpus bg = load_corpus(dir, plain);
  const ReferenceModel ref = pool_reference(bg.images, dict, r.config.model,
                                            "background corpus: " + fs::path(dir).filename().string());
  save_reference(r.out / "reference.json", ref);
  emit(out, {{"event", "pool-background"}, {"images", bg.names.size()}, {"r_cap", ref.histogram.edges.back()}});
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active basis deformable templates: learning, detection and sketching"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--n", g.n, "number of template elements");
  app.add_option("--resize", g.resize, "resize factor applied to the training corpus");
  app.add_option("--background", g.background, "natural-image directory for the reference model");
  app.add_option("--reference", g.reference, "reference model file from pool-background");

  std::string corpus, mode, truth, template_path, image_path, dump_path;
  int width = 0, height = 0;

  auto* learn = app.add_subcommand("learn", "supervised learning on an aligned corpus");
  learn->add_option("corpus", corpus, "image directory")->required();
  auto* learn_em = app.add_subcommand("learn-em", "EM learning with latent flips, rotations or locations");
  learn_em->add_option("--mode", mode, "flip | rotate | locate")
      ->required()
      ->check(CLI::IsMember({"flip", "rotate", "locate"}));
  learn_em->add_option("corpus", corpus, "image directory")->required();
  learn_em->add_option("--truth", truth, "ground-truth labels for accuracy reporting");
  auto* det = app.add_subcommand("detect", "detect a template in an image");
  det->add_option("template", template_path)->required();
  det->add_option("image", image_path)->required();
  det->add_option("--dump-responses", dump_path, "write the detection level's energy maps");
  auto* render = app.add_subcommand("render", "render a template sketch");
  render->add_option("template", template_path)->required();
  render->add_option("--width", width);
  render->add_option("--height", height);
  auto* pool = app.add_subcommand("pool-background", "pool a reference model from natural images");
  pool->add_option("corpus", corpus, "image directory")->required();
  app.fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const Run r = start(g);
    if (*learn) return cmd_learn(r, corpus, out, err);
    if (*learn_em) return cmd_learn_em(r, mode, corpus, truth, out, err);
    if (*det) return cmd_detect(r, template_path, image_path, dump_path, out);
    if (*render) return cmd_render(r, template_path, width, height, out);
    if (*pool) return cmd_pool(r, corpus, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DegenerateImageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace abm::cli
