#include "activebasis/persistence.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "activebasis/error.hpp"

namespace abm {

using nlohmann::ordered_json;

void RunConfig::validate() const {
  gabor.validate();
  if (scale && !(*scale > 2.0)) throw ConfigError("gabor.scale must exceed 2 pixels");
  if (model.bins < 1) throw ConfigError("model.bins must be >= 1");
  if (!(model.cap_quantile > 0.0 && model.cap_quantile <= 1.0)) throw ConfigError("model.cap_quantile must be in (0, 1]");
  if (!(model.lambda_max > 0.0) || model.lambda_steps < 1) throw ConfigError("model lambda grid is empty");
  if (!(model.xi > 0.0)) throw ConfigError("model.xi must be > 0");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (!(epsilon >= 0.0)) throw ConfigError("sketch.epsilon must be >= 0");
  if (activity.b1 < 0 || !(activity.b2 >= 0.0)) throw ConfigError("activity bounds must be >= 0");
  if (factors.empty()) throw ConfigError("detect.factors is empty");
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (!(factors[i] > 0.0) || (i > 0 && !(factors[i] < factors[i - 1]))) {
      throw ConfigError("detect.factors must be positive and strictly decreasing");
    }
  }
  if (iterations_flip < 1 || iterations_rotate < 1 || iterations_locate < 1) {
    throw ConfigError("em iterations must be >= 1");
  }
  if (lattice_width < 0 || lattice_height < 0) throw ConfigError("em.lattice must be >= 0");
  if (!(resize > 0.0)) throw ConfigError("resize must be > 0");
}

SketchOptions RunConfig::sketch_options() const {
  SketchOptions o;
  o.n = n;
  o.epsilon = epsilon;
  o.activity = activity;
  o.update = update;
  return o;
}

namespace {

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["gabor"] = {{"length_px", c.gabor.length_px},
                {"orientations", c.gabor.orientations},
                {"aspect", c.gabor.aspect},
                {"sigma1_frac", c.gabor.sigma1_frac},
                {"cycles", c.gabor.cycles},
                {"scale", c.scale ? ordered_json(*c.scale) : ordered_json(nullptr)}};
  j["model"] = {{"xi", c.model.xi},
                {"bins", c.model.bins},
                {"cap_quantile", c.model.cap_quantile},
                {"lambda_max", c.model.lambda_max},
                {"lambda_steps", c.model.lambda_steps}};
  j["sketch"] = {{"n", c.n},
                 {"epsilon", c.epsilon},
                 {"b1", c.activity.b1},
                 {"b2", c.activity.b2},
                 {"update", c.update == ResponseUpdate::kZero ? "zero" : "subtract"}};
  j["detect"] = {{"factors", c.factors}};
  j["em"] = {{"iterations_flip", c.iterations_flip},
             {"iterations_rotate", c.iterations_rotate},
             {"iterations_locate", c.iterations_locate},
             {"rotations", c.rotations},
             {"lattice_width", c.lattice_width},
             {"lattice_height", c.lattice_height},
             {"locate_with_flip", c.locate_with_flip}};
  j["seed"] = c.seed;
  j["resize"] = c.resize;
  j["luma"] = {{"r", c.luma.r}, {"g", c.luma.g}, {"b", c.luma.b}};
  return j;
}

template <typename T>
void take(const ordered_json& obj, const char* key, T& out, std::set<std::string>& seen) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  seen.insert(key);
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key ") + key + ": " + e.what());
  }
}

void reject_unknown(const ordered_json& obj, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!seen.count(it.key())) throw ConfigError("unknown config key " + where + it.key());
  }
}

const ordered_json& section(const ordered_json& root, const char* key, std::set<std::string>& seen) {
  static const ordered_json kEmpty = ordered_json::object();
  auto it = root.find(key);
  if (it == root.end()) return kEmpty;
  if (!it->is_object()) throw ConfigError(std::string("config section ") + key + " must be an object");
  seen.insert(key);
  return *it;
}

ordered_json parse_json(const std::string& text, const char* what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string config_to_string(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig parse_config(const std::string& text, const RunConfig& base) {
  const ordered_json root = parse_json(text, "config");
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = base;
  std::set<std::string> top;
  {
    std::set<std::string> s;
    const auto& g = section(root, "gabor", top);
    take(g, "length_px", c.gabor.length_px, s);
    take(g, "orientations", c.gabor.orientations, s);
    take(g, "aspect", c.gabor.aspect, s);
    take(g, "sigma1_frac", c.gabor.sigma1_frac, s);
    take(g, "cycles", c.gabor.cycles, s);
    if (auto it = g.find("scale"); it != g.end()) {
      s.insert("scale");
      if (it->is_null()) {
        c.scale.reset();
      } else if (it->is_number()) {
        c.scale = it->get<double>();
      } else {
        throw ConfigError("config key scale must be a number or null");
      }
    }
    reject_unknown(g, s, "gabor.");
  }
  {
    std::set<std::string> s;
    const auto& m = section(root, "model", top);
    take(m, "xi", c.model.xi, s);
    take(m, "bins", c.model.bins, s);
    take(m, "cap_quantile", c.model.cap_quantile, s);
    take(m, "lambda_max", c.model.lambda_max, s);
    take(m, "lambda_steps", c.model.lambda_steps, s);
    reject_unknown(m, s, "model.");
  }
  {
    std::set<std::string> s;
    const auto& k = section(root, "sketch", top);
    take(k, "n", c.n, s);
    take(k, "epsilon", c.epsilon, s);
    take(k, "b1", c.activity.b1, s);
    take(k, "b2", c.activity.b2, s);
    std::string update = c.update == ResponseUpdate::kZero ? "zero" : "subtract";
    take(k, "update", update, s);
    if (update == "zero") {
      c.update = ResponseUpdate::kZero;
    } else if (update == "subtract") {
      c.update = ResponseUpdate::kSubtract;
    } else {
      throw ConfigError("sketch.update must be \"zero\" or \"subtract\"");
    }
    reject_unknown(k, s, "sketch.");
  }
  {
    std::set<std::string> s;
    const auto& d = section(root, "detect", top);
    take(d, "factors", c.factors, s);
    reject_unknown(d, s, "detect.");
  }
  {
    std::set<std::string> s;
    const auto& e = section(root, "em", top);
    take(e, "iterations_flip", c.iterations_flip, s);
    take(e, "iterations_rotate", c.iterations_rotate, s);
    take(e, "iterations_locate", c.iterations_locate, s);
    take(e, "rotations", c.rotations, s);
    take(e, "lattice_width", c.lattice_width, s);
    take(e, "lattice_height", c.lattice_height, s);
    take(e, "locate_with_flip", c.locate_with_flip, s);
    reject_unknown(e, s, "em.");
  }
  {
    std::set<std::string> s;
    const auto& l = section(root, "luma", top);
    take(l, "r", c.luma.r, s);
    take(l, "g", c.luma.g, s);
    take(l, "b", c.luma.b, s);
    reject_unknown(l, s, "luma.");
  }
  take(root, "seed", c.seed, top);
  take(root, "resize", c.resize, top);
  reject_unknown(root, top, "");
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  return parse_config(read_text(path), base);
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config_to_string(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

ordered_json reference_json(const ReferenceModel& r) {
  ordered_json j;
  j["xi"] = r.xi;
  j["source"] = r.source;
  j["histogram"] = {{"edges", r.histogram.edges}, {"masses", r.histogram.masses}};
  j["lambda_grid"] = r.lambda_grid;
  j["log_z"] = r.log_z;
  j["mu"] = r.mu;
  return j;
}

ReferenceModel reference_from(const ordered_json& j) {
  try {
    ReferenceModel r;
    r.xi = j.at("xi").get<double>();
    r.source = j.at("source").get<std::string>();
    r.histogram.edges = j.at("histogram").at("edges").get<std::vector<double>>();
    r.histogram.masses = j.at("histogram").at("masses").get<std::vector<double>>();
    r.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    r.log_z = j.at("log_z").get<std::vector<double>>();
    r.mu = j.at("mu").get<std::vector<double>>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed reference model: ") + e.what());
  }
}

}  // namespace

std::string reference_to_string(const ReferenceModel& ref) {
  ordered_json j;
  j["format"] = "activebasis-reference";
  j["version"] = kTemplateFormatVersion;
  j["reference"] = reference_json(ref);
  return j.dump(1) + "\n";
}

ReferenceModel parse_reference(const std::string& text) {
  const ordered_json j = parse_json(text, "reference model");
  if (j.value("format", "") != "activebasis-reference") throw ConfigError("not a reference model file");
  return reference_from(j.at("reference"));
}

void save_reference(const std::filesystem::path& path, const ReferenceModel& ref) {
  write_text_atomic(path, reference_to_string(ref));
}

ReferenceModel load_reference(const std::filesystem::path& path) { return parse_reference(read_text(path)); }

std::string template_to_string(const ActiveBasisTemplate& t, const Provenance& p) {
  if (!t.reference) throw ConfigError("template has no reference model");
  ordered_json j;
  j["format"] = "activebasis-template";
  j["version"] = kTemplateFormatVersion;
  j["gabor"] = {{"length_px", t.gabor.length_px},
                {"orientations", t.gabor.orientations},
                {"aspect", t.gabor.aspect},
                {"sigma1_frac", t.gabor.sigma1_frac},
                {"cycles", t.gabor.cycles}};
  j["scale"] = t.scale;
  j["activity"] = {{"b1", t.activity.b1}, {"b2", t.activity.b2}};
  j["lattice"] = {{"width", t.width}, {"height", t.height}};
  ordered_json elements = ordered_json::array();
  for (const auto& e : t.elements) {
    elements.push_back({{"x", e.x},
                        {"y", e.y},
                        {"orientation", e.orientation},
                        {"lambda", e.weight.lambda},
                        {"log_z", e.weight.log_z},
                        {"pursuit_index", e.pursuit_index}});
  }
  j["elements"] = std::move(elements);
  j["reference"] = reference_json(*t.reference);
  ordered_json prov;
  prov["config_hash"] = p.config_hash;
  prov["config"] = p.config.empty() ? ordered_json(nullptr) : parse_json(p.config, "provenance config");
  prov["corpus"] = p.corpus;
  j["provenance"] = std::move(prov);
  return j.dump(1) + "\n";
}

TemplateFile parse_template(const std::string& text) {
  const ordered_json j = parse_json(text, "template file");
  if (!j.is_object() || j.value("format", "") != "activebasis-template") throw ConfigError("not a template file");
  if (j.value("version", 0) != kTemplateFormatVersion) {
    throw ConfigError("unsupported template version " + std::to_string(j.value("version", 0)));
  }
  TemplateFile f;
  try {
    auto& t = f.tmpl;
    const auto& g = j.at("gabor");
    t.gabor.length_px = g.at("length_px").get<int>();
    t.gabor.orientations = g.at("orientations").get<int>();
    t.gabor.aspect = g.at("aspect").get<double>();
    t.gabor.sigma1_frac = g.at("sigma1_frac").get<double>();
    t.gabor.cycles = g.at("cycles").get<double>();
    t.gabor.validate();
    t.scale = j.at("scale").get<double>();
    t.activity.b1 = j.at("activity").at("b1").get<int>();
    t.activity.b2 = j.at("activity").at("b2").get<double>();
    t.width = j.at("lattice").at("width").get<int>();
    t.height = j.at("lattice").at("height").get<int>();
    for (const auto& e : j.at("elements")) {
      TemplateElement el;
      el.x = e.at("x").get<int>();
      el.y = e.at("y").get<int>();
      el.orientation = e.at("orientation").get<int>();
      el.weight.lambda = e.at("lambda").get<double>();
      el.weight.log_z = e.at("log_z").get<double>();
      el.pursuit_index = e.at("pursuit_index").get<double>();
      if (el.orientation < 0 || el.orientation >= t.gabor.orientations) {
        throw ConfigError("template element orientation out of range");
      }
      t.elements.push_back(el);
    }
    t.reference = std::make_shared<const ReferenceModel>(reference_from(j.at("reference")));
    const auto& p = j.at("provenance");
    f.provenance.config_hash = p.at("config_hash").get<std::string>();
    f.provenance.config = p.at("config").is_null() ? std::string() : p.at("config").dump(2);
    f.provenance.corpus = p.at("corpus").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed template file: ") + e.what());
  }
  return f;
}

void save_template(const std::filesystem::path& path, const ActiveBasisTemplate& tmpl, const Provenance& provenance) {
  write_text_atomic(path, template_to_string(tmpl, provenance));
}

TemplateFile load_template(const std::filesystem::path& path) { return parse_template(read_text(path)); }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace abm
