#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvlloc/geometry.hpp"
#include "mvlloc/tensor.hpp"

namespace mvl {

struct Scene {
  std::size_t index = 0;
  std::string name;
  std::string description;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Ordered scenes with their captions. Indices are contiguous from 0.
class SceneCatalog {
 public:
  SceneCatalog() = default;
  /// Assigns indices in order; throws std::invalid_argument on empty or
  /// duplicate names, empty descriptions, or an empty list.
  explicit SceneCatalog(std::vector<std::pair<std::string, std::string>> name_and_description);

  const std::vector<Scene>& scenes() const { return scenes_; }
  std::size_t size() const { return scenes_.size(); }
  const Scene& at(std::size_t index) const { return scenes_.at(index); }
  /// Index of `name`, or size() when absent.
  std::size_t find(std::string_view name) const;
  /// First `count` scenes.
  SceneCatalog prefix(std::size_t count) const;

  static SceneCatalog seven_scenes();
  static SceneCatalog cambridge_landmarks();

  friend bool operator==(const SceneCatalog&, const SceneCatalog&) = default;

 private:
  std::vector<Scene> scenes_;
};

/// JSON array of {"name": ..., "description": ...} objects.
SceneCatalog load_catalog_json(const std::filesystem::path& path);
SceneCatalog parse_catalog_json(std::string_view json);

/// Token vocabulary. Ids 0 and 1 are reserved for padding and unknown
/// words; known words follow in lexicographic order.
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnknownId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocab() = default;
  explicit Vocab(std::vector<std::string> sorted_words);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Lowercases ASCII letters, drops ASCII punctuation, splits on whitespace.
std::vector<std::string> normalize_words(std::string_view text);

Vocab build_vocab(const SceneCatalog& catalog);

/// Normalized words mapped through `vocab`, truncated to `max_len`; empty
/// text yields a single unknown id.
std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);
std::string detokenize(std::span<const int> ids, const Vocab& vocab);

struct PoseSample {
  Tensor image;  // [C x H x W], values in [0, 1]
  std::vector<int> caption_tokens;
  std::size_t scene_index = 0;
  geo::Pose pose;
};

/// Image geometry and caption budget for generated samples.
struct SyntheticSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t max_caption_len = 32;
};

inline constexpr std::size_t kLandmarksPerScene = 8;

struct Landmark {
  geo::Vec3 position{};
  std::array<double, 3> color{};
};

/// Fixed landmark constellation of a scene; depends only on the index.
std::vector<Landmark> scene_landmarks(std::size_t scene_index);

/// Renders landmarks seen from `pose` (camera-to-world, +z forward, x right,
/// y down) as Gaussian splats on a black [3 x H x W] image.
Tensor render_view(std::span<const Landmark> landmarks, const geo::Pose& pose, std::size_t height, std::size_t width);

/// Pose of one synthetic sample: position uniform in [-0.5, 0.5]^3,
/// orientation a normalized 4D Gaussian, canonicalized.
geo::Pose synthetic_pose(std::uint64_t seed, std::size_t scene_index, std::size_t sample_index);

/// K * samples_per_scene samples, scene-major. Each sample is a pure
/// function of (seed, scene index, sample index).
std::vector<PoseSample> generate_synthetic(std::uint64_t seed, const SceneCatalog& catalog,
                                           std::size_t samples_per_scene, const SyntheticSpec& spec);

/// A dataset as stored on disk.
struct Dataset {
  SceneCatalog catalog;
  std::vector<PoseSample> samples;
  std::uint64_t seed = 0;
};

/// Writes one directory per scene (manifest.txt, images.bin, poses.txt) plus
/// a root dataset.txt, and returns the hex SHA-256 digest of everything
/// written.
std::string write_dataset(const std::filesystem::path& root, const Dataset& dataset);
/// Reads a dataset written by write_dataset; captions are re-tokenized with
/// the catalog vocabulary and `max_caption_len`.
Dataset read_dataset(const std::filesystem::path& root, std::size_t max_caption_len);
/// Digest of an existing dataset directory, computed as in write_dataset.
std::string dataset_digest(const std::filesystem::path& root);

}  // namespace mvl
