#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "activebasis/image_ops.hpp"
#include "activebasis/pursuit.hpp"
#include "activebasis/stat_model.hpp"

namespace abm {

/// Every tunable of a run. Serialized canonically into each artifact.
struct RunConfig {
  GaborParams gabor;
  std::optional<double> scale;  ///< wave period; defaults to length / cycles
  ReferenceConfig model;
  int n = 50;
  double epsilon = 0.1;
  ActivitySet activity;
  ResponseUpdate update = ResponseUpdate::kZero;
  std::vector<double> factors = default_factor_ladder();
  int iterations_flip = 3;
  int iterations_rotate = 5;
  int iterations_locate = 3;
  std::vector<double> rotations{-kPi / 6.0, 0.0, kPi / 6.0};
  int lattice_width = 0;
  int lattice_height = 0;
  bool locate_with_flip = false;
  std::uint64_t seed = 0;
  double resize = 1.0;
  LumaWeights luma;

  void validate() const;
  Dictionary dictionary() const { return Dictionary(gabor, scale); }
  SketchOptions sketch_options() const;
};

/// Canonical JSON text of the config (fixed key order, shortest round-trip doubles).
std::string config_to_string(const RunConfig& config);
/// Overlays the keys present in `text` on `base`. Unknown keys throw ConfigError.
RunConfig parse_config(const std::string& text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

struct Provenance {
  std::string config_hash;
  std::string config;  ///< canonical config text
  std::vector<std::string> corpus;
};

struct TemplateFile {
  ActiveBasisTemplate tmpl;
  Provenance provenance;
};

inline constexpr int kTemplateFormatVersion = 1;

std::string template_to_string(const ActiveBasisTemplate& tmpl, const Provenance& provenance);
TemplateFile parse_template(const std::string& text);
void save_template(const std::filesystem::path& path, const ActiveBasisTemplate& tmpl, const Provenance& provenance);
TemplateFile load_template(const std::filesystem::path& path);

std::string reference_to_string(const ReferenceModel& ref);
ReferenceModel parse_reference(const std::string& text);
void save_reference(const std::filesystem::path& path, const ReferenceModel& ref);
ReferenceModel load_reference(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace abm
