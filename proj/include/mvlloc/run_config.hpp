#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvlloc/data.hpp"
#include "mvlloc/model.hpp"
#include "mvlloc/training.hpp"

namespace mvl {

struct DataConfig {
  /// "7scenes", "cambridge", or a path to a JSON catalog.
  std::string catalog = "7scenes";
  /// Use only the first `scenes` catalog entries; 0 keeps all.
  std::size_t scenes = 0;
  std::size_t samples_per_scene = 32;
  std::uint64_t seed = 0;
  /// Rendered image size; 0 means the model input size.
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  /// Dataset directory; empty means <output>/dataset.
  std::string dataset;
};

/// Everything one invocation needs. Loaded from a JSON object with sections
/// "model", "train", "data" and "paths"; every leaf key is listed by
/// run_config_keys().
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::filesystem::path output;

  /// The catalog named by data.catalog, cut to data.scenes.
  SceneCatalog catalog() const;
  std::filesystem::path dataset_path() const;

  /// Fills derived values (model.n_scenes and model.vocab when 0) and checks
  /// every invariant; throws ConfigError naming the key.
  void finalize();
};

/// Dotted names of all accepted keys, e.g. "model.d_model", "train.jitter.hue".
std::vector<std::string> run_config_keys();

/// MVLLOC_OUTPUT_ROOT if set and nonempty, else "runs".
std::filesystem::path default_output_root();

/// Defaults, then `json` (may be empty), then "key=value" overrides in order.
/// Override values are read as JSON when they parse, otherwise as strings.
/// The result is finalized.
RunConfig parse_run_config(std::string_view json, std::span<const std::string> overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// The config as a JSON document accepted by parse_run_config.
std::string run_config_to_json(const RunConfig& config);

}  // namespace mvl
