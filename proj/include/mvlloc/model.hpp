#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvlloc/autodiff.hpp"
#include "mvlloc/geometry.hpp"
#include "mvlloc/rng.hpp"
#include "mvlloc/tensor.hpp"

namespace mvl {

/// Architecture hyperparameters.
struct ModelConfig {
  std::size_t channels = 3;
  std::size_t height = 224;
  std::size_t width = 224;
  std::size_t patch = 16;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  std::size_t n_scenes = 7;
  std::size_t vocab = 0;
  std::size_t max_caption_len = 32;
  double dropout = 0.5;

  /// Positional scale W^(-1/2).
  double gamma() const;
  std::size_t grid_rows() const { return height / patch; }
  std::size_t grid_cols() const { return width / patch; }
  std::size_t visual_tokens() const { return grid_rows() * grid_cols(); }
  std::size_t patch_features() const { return channels * patch * patch; }

  /// Throws ConfigError naming the first violated invariant
  /// (keys are reported as "model.<field>").
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::array<std::size_t, 4> kAllowedDecoderDepths{2, 4, 6, 8};

/// Closed-form learnable parameter count:
///   C p^2 d + d                       conv patch embedding
/// + V d                               token embedding
/// + N (8 d^2 + 12 d)                  per layer: 2 LayerNorms, SA and MHA (q,k,v,o)
/// + 8 d^2 + 7 d                       final LayerNorm + feedforward (hidden 4d)
/// + d K + K                           scene classifier
/// + K (d^2 + 8 d + 7)                 per-scene pose MLPs (d -> d -> 7)
/// + 2                                 loss weights alpha, beta
std::size_t expected_parameter_count(const ModelConfig& config);

/// 1D sinusoidal table [positions x width]: column 2i holds
/// sin(pos / 10000^(2i/width)), column 2i+1 the matching cosine.
Tensor sinusoidal_table(std::size_t positions, std::size_t width);
/// 2D separable table for a rows x cols patch grid, [rows*cols x d]: the
/// first d/2 columns encode the grid row, the last d/2 the grid column.
Tensor sinusoidal_grid(std::size_t rows, std::size_t cols, std::size_t d);

/// All learnable tensors plus the fixed positional tables.
class ModelParams {
 public:
  /// Truncated-normal (std 0.02) weights, zero biases except the identity
  /// quaternion in each pose head's output bias, unit LayerNorm gains,
  /// alpha = -4, beta = -2.
  static ModelParams initialize(const ModelConfig& config, Rng& rng);
  /// Rebuilds from stored tensors; validates names and shapes.
  static ModelParams from_tensors(const ModelConfig& config, std::map<std::string, Tensor> tensors);

  const ModelConfig& config() const { return config_; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }

  const Tensor& visual_positions() const { return visual_positions_; }
  const Tensor& text_positions() const { return text_positions_; }

  std::size_t parameter_count() const;

 private:
  ModelParams(ModelConfig config, std::map<std::string, Tensor> tensors);

  ModelConfig config_;
  std::map<std::string, Tensor> tensors_;
  Tensor visual_positions_;
  Tensor text_positions_;
};

/// Expected name -> shape map for a configuration.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& config);

enum class Mode { kTrain, kEval };

/// One image/caption pair fed to the network.
struct ModelInput {
  const Tensor* image = nullptr;  // [C x H x W]
  std::span<const int> tokens;
};

/// Per-layer attention probabilities, each [T x T] over the joint sequence.
struct LayerAttention {
  Tensor self_attention;
  std::vector<Tensor> heads;
};

/// Resolves parameter names to tape handles for one forward pass.
class ParamBinder {
 public:
  ParamBinder(GradientTape& tape, const ModelParams& params) : tape_(tape), params_(params) {}
  Var operator()(const std::string& name) const { return tape_.parameter(name, params_.at(name)); }
  GradientTape& tape() const { return tape_; }
  const ModelParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config(); }

 private:
  GradientTape& tape_;
  const ModelParams& params_;
};

/// Per-forward settings for dropout and attention capture.
struct RunOptions {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;  // required when mode == kTrain and dropout > 0
  std::vector<LayerAttention>* attention = nullptr;
};

/// Splits [C x H x W] into patch rows [Nv x C*p*p], grid row-major,
/// features ordered (channel, dy, dx).
Tensor patchify(const Tensor& image, std::size_t patch);

/// f_conv(I) + gamma * P_vis, [Nv x d].
Var encode_image(const ParamBinder& bind, const Tensor& image);
/// f_token(T) + gamma * P_txt over the actual token count, [Nt x d].
Var encode_text(const ParamBinder& bind, std::span<const int> tokens);
/// V' = V + rowsoftmax(V L^T / sqrt(d)) L, joint = [V'; L].
/// `similarity_weights`, when given, receives rowsoftmax(V L^T / sqrt(d)).
Var fuse_modalities(const Var& visual, const Var& language, Tensor* similarity_weights = nullptr);
/// x' = x + SA(LN(x)); x'' = x' + MHA(LN(x')), dropout on sublayer outputs.
Var decoder_layer(const ParamBinder& bind, const Var& x, std::size_t layer, const RunOptions& options);
/// x + FF(LN(x)), FF = linear(4d) -> gelu -> linear(d).
Var final_feedforward(const ParamBinder& bind, const Var& x, const RunOptions& options);
/// Mean of the first `visual_tokens` rows, [1 x d].
Var pool_visual(const Var& features, std::size_t visual_tokens);
/// Linear head on pooled features -> [1 x K] logits.
Var classify_scene(const ParamBinder& bind, const Var& pooled);
/// Scene `k`'s 2-layer MLP on pooled features -> [1 x 7] = (p, q_raw).
Var regress_pose(const ParamBinder& bind, const Var& pooled, std::size_t scene);

/// Tape-level result of one sample's forward pass.
struct TapeForward {
  Var logits;              // [1 x K]
  std::vector<Var> heads;  // K entries, each [1 x 7]
  std::size_t selected = 0;
};

/// Runs the whole network for one sample. Train mode routes through
/// `routed_scene` (the ground-truth index); eval mode through argmax of the
/// scene probabilities (ties resolve to the lowest index).
TapeForward forward_on_tape(const ParamBinder& bind, const ModelInput& input, const RunOptions& options,
                            std::optional<std::size_t> routed_scene = std::nullopt);

struct HeadPose {
  geo::Vec3 p{};
  std::array<double, 4> q_raw{};  // (w, x, y, z), unnormalized
};

struct ForwardOutput {
  Tensor logits;
  Tensor probabilities;
  std::vector<HeadPose> heads;
  std::size_t selected = 0;
  std::vector<LayerAttention> attention;

  const HeadPose& selected_pose() const { return heads.at(selected); }
};

/// Value-level batch forward. In train mode `routed_scenes` must hold one
/// index per sample. Errors are rethrown with the sample index prepended.
std::vector<ForwardOutput> forward(const ModelParams& params, std::span<const ModelInput> batch, Mode mode, Rng& rng,
                                   std::span<const std::size_t> routed_scenes = {}, bool capture_attention = false);

/// Predicted pose of a head output: normalized, hemisphere-canonical.
geo::Pose head_to_pose(const HeadPose& head);

}  // namespace mvl
