#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvlloc/augment.hpp"
#include "mvlloc/autodiff.hpp"
#include "mvlloc/data.hpp"
#include "mvlloc/model.hpp"
#include "mvlloc/report.hpp"

namespace mvl {

struct TrainConfig {
  double lr0 = 4.5e-5;
  double weight_decay = 4e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 280;
  /// Overrides ModelConfig::dropout for the trained model.
  double dropout = 0.5;
  std::uint64_t seed = 0;
  /// Interval in steps between periodic checkpoints.
  std::size_t eval_every = 500;
  bool color_jitter = true;
  ColorJitterFactors jitter;

  /// Throws ConfigError with keys "train.<field>".
  void validate() const;
};

struct AdamWSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::uint64_t step = 0;
};

/// One AdamW update of every tensor in `params`:
///   w <- w (1 - lr wd)
///   w <- w - lr m_hat / (sqrt(v_hat) + eps)
/// with bias-corrected moments. `grads` must hold a same-shaped tensor for
/// each parameter; throws std::invalid_argument otherwise.
void adamw_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
                OptimizerState& state, double lr, double weight_decay, const AdamWSettings& settings = {});

/// lr0 * 0.5 * (1 + cos(pi * step / total_steps)). Throws std::out_of_range
/// unless 0 <= step <= total_steps and total_steps > 0.
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0);

/// epochs * ceil(samples / batch_size).
std::uint64_t total_train_steps(std::size_t samples, const TrainConfig& config);

/// Image handed to the network: cropped to the model input (random crop in
/// train mode, centre crop in eval mode) and, in train mode with jitter
/// enabled, colour-jittered.
Tensor prepare_image(const Tensor& image, const ModelConfig& model, const TrainConfig& train, Mode mode, Rng& rng);

struct BatchGradients {
  double loss = 0.0;
  double classification = 0.0;
  double position_l1 = 0.0;  // batch means of the residual norms
  double rotation_l1 = 0.0;
  Gradients grads;
};

/// Mean multi-scene loss of a batch of prepared samples and its gradients.
/// Pose losses are routed through each sample's ground-truth scene head.
/// `rng` drives dropout; sample i uses rng.split(i).
BatchGradients batch_gradients(const ModelParams& params, std::span<const ModelInput> inputs,
                               std::span<const PoseSample* const> samples, const Rng& rng);

struct LossRecord {
  std::uint64_t step = 0;  // 1-based count of completed updates
  double lr = 0.0;
  double loss = 0.0;
  double classification = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  // Not part of the log line.
  double position_l1 = 0.0;
  double rotation_l1 = 0.0;
};

/// "step lr loss cls alpha beta", space separated, %.17g.
std::string format_loss_record(const LossRecord& record);

struct TrainOutputs {
  /// Directory receiving loss.log, periodic checkpoint_<step>.ckpt files and
  /// the final model.ckpt.
  std::optional<std::filesystem::path> directory;
  /// Called after every update, e.g. for progress output.
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> log;
};

/// Trains one model on all scenes. The model vocabulary defaults to the
/// catalog vocabulary when `model.vocab` is 0. Throws DivergenceError when a
/// loss becomes non-finite and std::invalid_argument for inconsistent
/// inputs.
TrainResult train(ModelConfig model, const TrainConfig& config, std::span<const PoseSample> samples,
                  const SceneCatalog& catalog, const TrainOutputs& outputs = {});

struct Prediction {
  geo::Pose pose;
  std::size_t scene = 0;
};

/// Eval-mode predictions: centre crop, no jitter or dropout, pose from the
/// argmax-probability head.
std::vector<Prediction> predict(const ModelParams& params, std::span<const PoseSample> samples);

/// Per-scene medians of position/rotation errors and per-scene accuracy,
/// averaged across the scenes present in `samples`.
MetricsReport evaluate_predictions(std::span<const PoseSample> samples, const SceneCatalog& catalog,
                                   std::span<const Prediction> predictions);

MetricsReport evaluate(const ModelParams& params, std::span<const PoseSample> samples, const SceneCatalog& catalog);

}  // namespace mvl
