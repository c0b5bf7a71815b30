#include "mvlloc/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "mvlloc/augment.hpp"
#include "mvlloc/pose_io.hpp"
#include "mvlloc/rng.hpp"

namespace mvl {

namespace {

constexpr std::uint64_t kLandmarkSalt = 0x1A2D3A4CB5E6F708ULL;
constexpr double kLandmarkRadius = 2.0;
constexpr double kSplatWorldRadius = 0.2;
constexpr double kMinSplatSigma = 0.75;
constexpr double kNearPlane = 0.1;
constexpr char kImageMagic[4] = {'I', 'M', 'G', '1'};

std::string scene_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%02zu", index);
  return buf;
}

}  // namespace

SceneCatalog::SceneCatalog(std::vector<std::pair<std::string, std::string>> name_and_description) {
  if (name_and_description.empty()) throw std::invalid_argument("scene catalog is empty");
  std::set<std::string> names;
  for (auto& [name, description] : name_and_description) {
    if (name.empty()) throw std::invalid_argument("scene " + std::to_string(scenes_.size()) + " has an empty name");
    if (description.empty()) throw std::invalid_argument("scene '" + name + "' has an empty description");
    if (!names.insert(name).second) throw std::invalid_argument("duplicate scene name '" + name + "'");
    scenes_.push_back({scenes_.size(), std::move(name), std::move(description)});
  }
}

std::size_t SceneCatalog::find(std::string_view name) const {
  for (const auto& s : scenes_)
    if (s.name == name) return s.index;
  return scenes_.size();
}

SceneCatalog SceneCatalog::prefix(std::size_t count) const {
  if (count == 0 || count > scenes_.size()) {
    throw std::invalid_argument("cannot take " + std::to_string(count) + " scenes from a catalog of " +
                                std::to_string(scenes_.size()));
  }
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t i = 0; i < count; ++i) items.emplace_back(scenes_[i].name, scenes_[i].description);
  return SceneCatalog(std::move(items));
}

SceneCatalog SceneCatalog::seven_scenes() {
  return SceneCatalog({
      {"Chess", "A chessboard on a small table surrounded by chairs"},
      {"Fire", "A fireplace with a fire extinguisher beside a shelf of books"},
      {"Heads", "A mannequin head wearing a headset next to a monitor on a desk"},
      {"Office", "Two monitors side by side on a cluttered desk with a chair in front"},
      {"Pumpkin", "A pumpkin decoration on a cabinet beside an office printer"},
      {"Red Kitchen", "A red kitchen counter with cupboards above a sink and a kettle"},
      {"Stairs", "A narrow staircase with a metal handrail beside a white wall"},
  });
}

SceneCatalog SceneCatalog::cambridge_landmarks() {
  return SceneCatalog({
      {"King's College", "A gothic chapel with tall spires and arched windows behind a lawn"},
      {"Old Hospital", "A brick building with a clock tower above an arched entrance"},
      {"Shop Façade", "A row of shop fronts with display windows along a narrow street"},
      {"St Mary's Church", "A stone church with a square tower and carved arches beside a market"},
  });
}

SceneCatalog parse_catalog_json(std::string_view json) {
  const auto doc = nlohmann::json::parse(json);
  if (!doc.is_array()) throw std::invalid_argument("catalog JSON must be an array of scenes");
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("description")) {
      throw std::invalid_argument("catalog entries need \"name\" and \"description\"");
    }
    items.emplace_back(entry.at("name").get<std::string>(), entry.at("description").get<std::string>());
  }
  return SceneCatalog(std::move(items));
}

SceneCatalog load_catalog_json(const std::filesystem::path& path) { return parse_catalog_json(detail::read_file(path)); }

Vocab::Vocab(std::vector<std::string> sorted_words) {
  tokens_.emplace_back(kPadToken);
  tokens_.emplace_back(kUnknownToken);
  for (auto& w : sorted_words) tokens_.push_back(std::move(w));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnknownId : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (u < 0x80 && std::ispunct(u)) {
      continue;
    } else {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocab build_vocab(const SceneCatalog& catalog) {
  if (catalog.size() == 0) throw std::invalid_argument("cannot build a vocabulary from an empty catalog");
  std::set<std::string> words;
  for (const auto& scene : catalog.scenes()) {
    for (auto& w : normalize_words(scene.description)) words.insert(std::move(w));
  }
  return Vocab(std::vector<std::string>(words.begin(), words.end()));
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("tokenize: max_len must be at least 1");
  std::vector<int> ids;
  for (const auto& w : normalize_words(text)) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(w));
  }
  if (ids.empty()) ids.push_back(Vocab::kUnknownId);
  return ids;
}

std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<Landmark> scene_landmarks(std::size_t scene_index) {
  Rng rng(Rng::mix64(kLandmarkSalt + scene_index));
  const auto frame = geo::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal()).q;
  const double hue_offset = rng.uniform() / static_cast<double>(kLandmarksPerScene);
  std::vector<Landmark> landmarks;
  landmarks.reserve(kLandmarksPerScene);
  for (std::size_t m = 0; m < kLandmarksPerScene; ++m) {
    // Cube-corner directions keep landmarks on every side of the camera box.
    geo::Vec3 dir{(m & 1) ? 1.0 : -1.0, (m & 2) ? 1.0 : -1.0, (m & 4) ? 1.0 : -1.0};
    for (auto& c : dir) c += 0.15 * rng.normal();
    const double n = geo::norm(dir);
    const double radius = kLandmarkRadius + rng.uniform(-0.3, 0.3);
    for (auto& c : dir) c *= radius / n;
    Landmark lm;
    lm.position = geo::rotate(frame, dir);
    const double hue = static_cast<double>(m) / static_cast<double>(kLandmarksPerScene) + hue_offset;
    lm.color = hsv_to_rgb(hue, 1.0, 1.0);
    landmarks.push_back(lm);
  }
  return landmarks;
}

Tensor render_view(std::span<const Landmark> landmarks, const geo::Pose& pose, std::size_t height, std::size_t width) {
  Tensor image({3, height, width});
  const double focal = static_cast<double>(width) / 4.0;
  const double cx = static_cast<double>(width) / 2.0;
  const double cy = static_cast<double>(height) / 2.0;
  const geo::Quaternion world_to_camera = geo::conjugate(pose.q);
  const std::size_t plane = height * width;
  for (const auto& lm : landmarks) {
    const geo::Vec3 rel{lm.position[0] - pose.p[0], lm.position[1] - pose.p[1], lm.position[2] - pose.p[2]};
    const geo::Vec3 cam = geo::rotate(world_to_camera, rel);
    if (cam[2] < kNearPlane) continue;
    const double u = focal * cam[0] / cam[2] + cx;
    const double v = focal * cam[1] / cam[2] + cy;
    const double sigma = std::max(kMinSplatSigma, kSplatWorldRadius * focal / cam[2]);
    const double reach = 4.0 * sigma;
    const auto x0 = static_cast<long>(std::floor(std::max(0.0, u - reach)));
    const auto x1 = static_cast<long>(std::ceil(std::min(static_cast<double>(width), u + reach)));
    const auto y0 = static_cast<long>(std::floor(std::max(0.0, v - reach)));
    const auto y1 = static_cast<long>(std::ceil(std::min(static_cast<double>(height), v + reach)));
    for (long y = y0; y < y1; ++y) {
      for (long x = x0; x < x1; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - u;
        const double dy = static_cast<double>(y) + 0.5 - v;
        const double weight = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        const std::size_t idx = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        for (std::size_t c = 0; c < 3; ++c) image[c * plane + idx] += lm.color[c] * weight;
      }
    }
  }
  for (auto& v : image.storage()) v = std::min(v, 1.0);
  return image;
}

geo::Pose synthetic_pose(std::uint64_t seed, std::size_t scene_index, std::size_t sample_index) {
  Rng rng = Rng(seed).split(scene_index).split(sample_index);
  geo::Pose pose;
  for (auto& c : pose.p) c = rng.uniform(-0.5, 0.5);
  const double w = rng.normal();
  const double x = rng.normal();
  const double y = rng.normal();
  const double z = rng.normal();
  pose.q = geo::canonicalize_hemisphere(geo::normalize(w, x, y, z).q);
  return pose;
}

std::vector<PoseSample> generate_synthetic(std::uint64_t seed, const SceneCatalog& catalog,
                                           std::size_t samples_per_scene, const SyntheticSpec& spec) {
  if (samples_per_scene == 0) throw std::invalid_argument("samples_per_scene must be at least 1");
  const Vocab vocab = build_vocab(catalog);
  std::vector<PoseSample> samples;
  samples.reserve(catalog.size() * samples_per_scene);
  for (const auto& scene : catalog.scenes()) {
    const auto landmarks = scene_landmarks(scene.index);
    const auto tokens = tokenize(scene.description, vocab, spec.max_caption_len);
    for (std::size_t i = 0; i < samples_per_scene; ++i) {
      PoseSample s;
      s.pose = synthetic_pose(seed, scene.index, i);
      s.image = render_view(landmarks, s.pose, spec.height, spec.width);
      s.caption_tokens = tokens;
      s.scene_index = scene.index;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

namespace {

struct DatasetFiles {
  std::vector<std::pair<std::string, std::string>> files;  // relative path, bytes
};

std::string digest_of(const DatasetFiles& f) {
  std::ostringstream all(std::ios::binary);
  for (const auto& [rel, bytes] : f.files) {
    all << rel << '\0';
    detail::write_u64(all, bytes.size());
    all << bytes;
  }
  return detail::sha256_hex(all.str());
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& what) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error(what + ": malformed line '" + line + "'");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  return kv;
}

const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key,
                               const std::string& what) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error(what + ": missing '" + key + "'");
  return it->second;
}

std::vector<std::string> dataset_file_list(const std::filesystem::path& root) {
  const std::string index = detail::read_file(root / "dataset.txt");
  std::istringstream in(index);
  std::string line;
  std::vector<std::string> files{"dataset.txt"};
  while (std::getline(in, line)) {
    if (line.rfind("scene ", 0) == 0) {
      const std::string dir = line.substr(6);
      for (const char* f : {"manifest.txt", "images.bin", "poses.txt"}) files.push_back(dir + "/" + f);
    }
  }
  return files;
}

}  // namespace

std::string write_dataset(const std::filesystem::path& root, const Dataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  DatasetFiles out;

  std::ostringstream index;
  index << "mvlloc-dataset 1\n";
  index << "seed " << dataset.seed << '\n';
  index << "scenes " << dataset.catalog.size() << '\n';
  for (const auto& scene : dataset.catalog.scenes()) index << "scene " << scene_dir_name(scene.index) << '\n';
  out.files.emplace_back("dataset.txt", index.str());

  for (const auto& scene : dataset.catalog.scenes()) {
    std::vector<const PoseSample*> members;
    for (const auto& s : dataset.samples)
      if (s.scene_index == scene.index) members.push_back(&s);
    const std::string dir = scene_dir_name(scene.index);

    std::ostringstream manifest;
    manifest << "name " << scene.name << '\n';
    manifest << "description " << scene.description << '\n';
    manifest << "index " << scene.index << '\n';
    manifest << "samples " << members.size() << '\n';
    manifest << "seed " << dataset.seed << '\n';

    std::ostringstream images(std::ios::binary);
    std::ostringstream poses;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const Tensor& img = members[i]->image;
      images.write(kImageMagic, 4);
      for (auto d : img.shape()) detail::write_u32(images, static_cast<std::uint32_t>(d));
      for (double v : img.data()) detail::write_f64(images, v);
      if (i) poses << '\n';
      poses << format_7scenes_pose(members[i]->pose);
    }
    out.files.emplace_back(dir + "/manifest.txt", manifest.str());
    out.files.emplace_back(dir + "/images.bin", images.str());
    out.files.emplace_back(dir + "/poses.txt", poses.str());
  }

  for (const auto& [rel, bytes] : out.files) {
    const fs::path path = root / rel;
    fs::create_directories(path.parent_path());
    detail::write_file(path, bytes);
  }
  return digest_of(out);
}

std::string dataset_digest(const std::filesystem::path& root) {
  DatasetFiles f;
  for (const auto& rel : dataset_file_list(root)) f.files.emplace_back(rel, detail::read_file(root / rel));
  return digest_of(f);
}

Dataset read_dataset(const std::filesystem::path& root, std::size_t max_caption_len) {
  const auto index = parse_key_values(detail::read_file(root / "dataset.txt"), "dataset.txt");
  Dataset ds;
  ds.seed = std::stoull(require_key(index, "seed", "dataset.txt"));
  const std::size_t n_scenes = std::stoull(require_key(index, "scenes", "dataset.txt"));

  std::vector<std::pair<std::string, std::string>> items;
  std::vector<std::size_t> counts;
  for (std::size_t k = 0; k < n_scenes; ++k) {
    const std::string dir = scene_dir_name(k);
    const auto manifest = parse_key_values(detail::read_file(root / dir / "manifest.txt"), dir + "/manifest.txt");
    if (std::stoull(require_key(manifest, "index", dir)) != k) throw std::runtime_error(dir + ": index mismatch");
    items.emplace_back(require_key(manifest, "name", dir), require_key(manifest, "description", dir));
    counts.push_back(std::stoull(require_key(manifest, "samples", dir)));
  }
  ds.catalog = SceneCatalog(std::move(items));
  const Vocab vocab = build_vocab(ds.catalog);

  for (std::size_t k = 0; k < n_scenes; ++k) {
    const std::string dir = scene_dir_name(k);
    const auto tokens = tokenize(ds.catalog.at(k).description, vocab, max_caption_len);
    std::ifstream images(root / dir / "images.bin", std::ios::binary);
    if (!images) throw std::runtime_error("cannot open " + (root / dir / "images.bin").string());
    const std::string pose_text = detail::read_file(root / dir / "poses.txt");
    std::istringstream pose_lines(pose_text);
    for (std::size_t i = 0; i < counts[k]; ++i) {
      char magic[4];
      detail::read_exact(images, magic, 4, "images.bin");
      if (!std::equal(magic, magic + 4, kImageMagic)) throw std::runtime_error(dir + "/images.bin: bad block magic");
      Shape shape(3);
      for (auto& d : shape) d = detail::read_u32(images, "images.bin");
      std::vector<double> values(shape_size(shape));
      for (auto& v : values) v = detail::read_f64(images, "images.bin");

      std::string block;
      std::string line;
      int rows = 0;
      while (rows < 4 && std::getline(pose_lines, line)) {
        if (line.empty()) continue;
        block += line + '\n';
        ++rows;
      }
      PoseSample s;
      s.image = Tensor(std::move(shape), std::move(values));
      s.pose = parse_7scenes_pose(block);
      s.caption_tokens = tokens;
      s.scene_index = k;
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace mvl
