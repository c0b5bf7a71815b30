#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mvlloc/data.hpp"
#include "mvlloc/model.hpp"
#include "mvlloc/tensor.hpp"

namespace mvl {

/// Binary container, all integers and floats little-endian:
///
///   "MVLCKPT\0"                      8-byte magic
///   u32 version                      currently 1
///   config block                     u64 channels, height, width, patch,
///                                    d_model, n_heads, n_layers, n_scenes,
///                                    vocab, max_caption_len; f64 dropout
///   u64 step
///   u32 scene count, then per scene  u32-length-prefixed name, description
///   u32 tensor count, then per tensor
///     u32-length-prefixed name, u32 rank, u64 dims[rank], f64 data[...]
///
/// Tensors are stored in name order, so encoding is deterministic.
struct Checkpoint {
  ModelConfig config;
  std::uint64_t step = 0;
  SceneCatalog catalog;
  std::map<std::string, Tensor> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws std::runtime_error on bad magic, unknown version, truncation or
/// trailing bytes.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const ModelParams& params, std::uint64_t step, const SceneCatalog& catalog);
/// Validates the stored config and tensors against each other.
ModelParams restore_params(const Checkpoint& checkpoint);

}  // namespace mvl
