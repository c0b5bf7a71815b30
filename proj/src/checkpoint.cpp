#include "mvlloc/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace mvl {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kMaxRank = 8;

void write_config(std::ostream& os, const ModelConfig& c) {
  for (std::size_t v : {c.channels, c.height, c.width, c.patch, c.d_model, c.n_heads, c.n_layers, c.n_scenes, c.vocab,
                        c.max_caption_len}) {
    detail::write_u64(os, v);
  }
  detail::write_f64(os, c.dropout);
}

ModelConfig read_config(std::istream& is) {
  ModelConfig c;
  for (std::size_t* field : {&c.channels, &c.height, &c.width, &c.patch, &c.d_model, &c.n_heads, &c.n_layers,
                             &c.n_scenes, &c.vocab, &c.max_caption_len}) {
    *field = detail::read_u64(is, "checkpoint config");
  }
  c.dropout = detail::read_f64(is, "checkpoint config");
  return c;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, sizeof kMagic);
  detail::write_u32(os, kCheckpointVersion);
  write_config(os, checkpoint.config);
  detail::write_u64(os, checkpoint.step);
  detail::write_u32(os, static_cast<std::uint32_t>(checkpoint.catalog.size()));
  for (const auto& scene : checkpoint.catalog.scenes()) {
    detail::write_string(os, scene.name);
    detail::write_string(os, scene.description);
  }
  detail::write_u32(os, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    tensor.require_finite("checkpoint tensor " + name);
    detail::write_string(os, name);
    detail::write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) detail::write_u64(os, d);
    for (double v : tensor.data()) detail::write_f64(os, v);
  }
  return os.str();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  std::istringstream is(std::string(bytes), std::ios::binary);
  char magic[sizeof kMagic];
  detail::read_exact(is, magic, sizeof magic, "checkpoint header");
  if (!std::equal(magic, magic + sizeof magic, kMagic)) throw std::runtime_error("not a checkpoint (bad magic)");
  const std::uint32_t version = detail::read_u32(is, "checkpoint header");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = read_config(is);
  ck.step = detail::read_u64(is, "checkpoint step");

  const std::uint32_t n_scenes = detail::read_u32(is, "checkpoint catalog");
  if (n_scenes > 0) {
    std::vector<std::pair<std::string, std::string>> items;
    for (std::uint32_t k = 0; k < n_scenes; ++k) {
      std::string name = detail::read_string(is, "checkpoint catalog");
      std::string description = detail::read_string(is, "checkpoint catalog");
      items.emplace_back(std::move(name), std::move(description));
    }
    ck.catalog = SceneCatalog(std::move(items));
  }

  const std::uint32_t n_tensors = detail::read_u32(is, "checkpoint tensors");
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    std::string name = detail::read_string(is, "tensor name");
    const std::uint32_t rank = detail::read_u32(is, "tensor rank");
    if (rank == 0 || rank > kMaxRank) throw std::runtime_error("tensor '" + name + "' has invalid rank");
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = detail::read_u64(is, "tensor shape");
      if (d == 0 || d > (std::size_t{1} << 32)) throw std::runtime_error("tensor '" + name + "' has invalid shape");
      count *= d;
    }
    if (count > bytes.size() / 8) throw std::runtime_error("tensor '" + name + "' larger than the file");
    std::vector<double> values(count);
    for (auto& v : values) v = detail::read_f64(is, "tensor data");
    if (!ck.tensors.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      throw std::runtime_error("duplicate tensor '" + name + "'");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(detail::read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const ModelParams& params, std::uint64_t step, const SceneCatalog& catalog) {
  return {params.config(), step, catalog, params.tensors()};
}

ModelParams restore_params(const Checkpoint& checkpoint) {
  checkpoint.config.validate();
  if (checkpoint.catalog.size() != 0 && checkpoint.catalog.size() != checkpoint.config.n_scenes) {
    throw std::runtime_error("checkpoint catalog has " + std::to_string(checkpoint.catalog.size()) +
                             " scenes but the model has " + std::to_string(checkpoint.config.n_scenes));
  }
  return ModelParams::from_tensors(checkpoint.config, checkpoint.tensors);
}

}  // namespace mvl
