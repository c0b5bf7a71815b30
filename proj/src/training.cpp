#include "mvlloc/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mvlloc/checkpoint.hpp"
#include "mvlloc/errors.hpp"
#include "mvlloc/loss.hpp"
#include "mvlloc/ops.hpp"

namespace mvl {

namespace {

// Stream tags below the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kDropoutStream = 4;

void check_samples(std::span<const PoseSample> samples, const SceneCatalog& catalog) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].scene_index >= catalog.size()) {
      throw std::invalid_argument("sample " + std::to_string(i) + " belongs to scene " +
                                  std::to_string(samples[i].scene_index) + ", which is not in the " +
                                  std::to_string(catalog.size()) + "-scene catalog");
    }
  }
}

PoseTarget target_of(const PoseSample& s) { return {s.pose.p, geo::canonicalize_hemisphere(s.pose.q), s.scene_index}; }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train.lr0", "must be a positive number");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train.weight_decay", "must be a non-negative number");
  }
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be at least 1");
  if (epochs == 0) throw ConfigError("train.epochs", "must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout", "must lie in [0, 1)");
  if (eval_every == 0) throw ConfigError("train.eval_every", "must be at least 1");
  const std::pair<const char*, double> factors[] = {{"train.jitter.brightness", jitter.brightness},
                                                    {"train.jitter.contrast", jitter.contrast},
                                                    {"train.jitter.saturation", jitter.saturation},
                                                    {"train.jitter.hue", jitter.hue}};
  for (const auto& [key, value] : factors) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError(key, "must be a non-negative number");
  }
  if (jitter.hue > 0.5) throw ConfigError("train.jitter.hue", "must not exceed 0.5");
}

void adamw_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
                OptimizerState& state, double lr, double weight_decay, const AdamWSettings& settings) {
  for (const auto& [name, w] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) throw std::invalid_argument("no gradient for parameter '" + name + "'");
    if (g->second.shape() != w.shape()) {
      throw std::invalid_argument("gradient of '" + name + "' has shape " + shape_string(g->second.shape()) +
                                  ", parameter has " + shape_string(w.shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);
  const double decay = 1.0 - lr * weight_decay;
  for (auto& [name, w] : params) {
    const Tensor& g = grads.at(name);
    auto [mit, m_new] = state.m.try_emplace(name, w.shape());
    auto [vit, v_new] = state.v.try_emplace(name, w.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (m.shape() != w.shape() || v.shape() != w.shape()) {
      throw std::invalid_argument("optimizer moments of '" + name + "' do not match the parameter shape");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g[i];
      v[i] = settings.beta2 * v[i] + (1.0 - settings.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] = w[i] * decay - lr * m_hat / (std::sqrt(v_hat) + settings.eps);
    }
  }
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double lr0) {
  if (total_steps == 0) throw std::out_of_range("cosine_lr: total_steps must be positive");
  if (step > total_steps) {
    throw std::out_of_range("cosine_lr: step " + std::to_string(step) + " beyond " + std::to_string(total_steps));
  }
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(phase));
}

std::uint64_t total_train_steps(std::size_t samples, const TrainConfig& config) {
  const std::uint64_t per_epoch = (samples + config.batch_size - 1) / config.batch_size;
  return per_epoch * config.epochs;
}

Tensor prepare_image(const Tensor& image, const ModelConfig& model, const TrainConfig& train, Mode mode, Rng& rng) {
  if (image.rank() != 3 || image.shape()[0] != model.channels) {
    throw std::invalid_argument("image shape " + shape_string(image.shape()) + " does not match " +
                                std::to_string(model.channels) + " channels");
  }
  Tensor out = image;
  if (image.shape()[1] != model.height || image.shape()[2] != model.width) {
    if (model.height != model.width) {
      throw std::invalid_argument("image shape " + shape_string(image.shape()) +
                                  " differs from the non-square model input");
    }
    out = crop(image, model.height, mode == Mode::kTrain ? CropMode::kRandom : CropMode::kCenter, rng);
  }
  if (mode == Mode::kTrain && train.color_jitter) out = color_jitter(out, train.jitter, rng);
  return out;
}

BatchGradients batch_gradients(const ModelParams& params, std::span<const ModelInput> inputs,
                               std::span<const PoseSample* const> samples, const Rng& rng) {
  if (inputs.empty() || inputs.size() != samples.size()) {
    throw std::invalid_argument("batch_gradients needs one sample per input and a nonempty batch");
  }
  GradientTape tape;
  ParamBinder bind(tape, params);
  const LossWeights weights{bind("loss.alpha"), bind("loss.beta")};
  std::vector<Var> totals;
  std::vector<Var> classification;
  BatchGradients out;
  totals.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Rng sample_rng = rng.split(i);
    const RunOptions options{Mode::kTrain, &sample_rng, nullptr};
    const TapeForward tf = forward_on_tape(bind, inputs[i], options, samples[i]->scene_index);
    const PoseLossTerms terms = pose_loss(tf.heads[tf.selected], target_of(*samples[i]), weights, tf.logits, i);
    totals.push_back(terms.total);
    classification.push_back(terms.classification);
    out.position_l1 += terms.position_l1.value().item();
    out.rotation_l1 += terms.rotation_l1.value().item();
  }
  const Var loss = batch_loss(totals);
  out.loss = loss.value().item();
  for (const auto& c : classification) out.classification += c.value().item();
  const auto n = static_cast<double>(inputs.size());
  out.classification /= n;
  out.position_l1 /= n;
  out.rotation_l1 /= n;
  if (!std::isfinite(out.loss)) return out;
  out.grads = tape.backward(loss);
  return out;
}

std::string format_loss_record(const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu %.17g %.17g %.17g %.17g %.17g", static_cast<unsigned long long>(r.step), r.lr,
                r.loss, r.classification, r.alpha, r.beta);
  return buf;
}

TrainResult train(ModelConfig model, const TrainConfig& config, std::span<const PoseSample> samples,
                  const SceneCatalog& catalog, const TrainOutputs& outputs) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("training set is empty");
  if (catalog.size() != model.n_scenes) {
    throw std::invalid_argument("catalog has " + std::to_string(catalog.size()) + " scenes but the model expects " +
                                std::to_string(model.n_scenes));
  }
  check_samples(samples, catalog);
  if (model.vocab == 0) model.vocab = build_vocab(catalog).size();
  model.dropout = config.dropout;
  model.validate();

  const Rng root(config.seed);
  Rng init_rng = root.split(kInitStream);
  TrainResult result{ModelParams::initialize(model, init_rng), {}};
  OptimizerState state;

  std::ofstream log_file;
  if (outputs.directory) {
    std::filesystem::create_directories(*outputs.directory);
    log_file.open(*outputs.directory / "loss.log", std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write " + (*outputs.directory / "loss.log").string());
  }

  const std::uint64_t total = total_train_steps(samples.size(), config);
  std::vector<std::size_t> order(samples.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = root.split(kShuffleStream).split(epoch);
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Rng augment_rng = root.split(kAugmentStream).split(step);
      std::vector<Tensor> images;
      std::vector<const PoseSample*> batch;
      images.reserve(end - begin);
      for (std::size_t j = begin; j < end; ++j) {
        const PoseSample& s = samples[order[j]];
        Rng r = augment_rng.split(j - begin);
        images.push_back(prepare_image(s.image, model, config, Mode::kTrain, r));
        batch.push_back(&s);
      }
      std::vector<ModelInput> inputs;
      for (std::size_t j = 0; j < batch.size(); ++j) inputs.push_back({&images[j], batch[j]->caption_tokens});

      const double lr = cosine_lr(step, total, config.lr0);
      BatchGradients bg;
      try {
        bg = batch_gradients(result.params, inputs, batch, root.split(kDropoutStream).split(step));
      } catch (const std::domain_error& e) {
        // Non-finite or degenerate activations: the run has diverged.
        throw DivergenceError("step " + std::to_string(step + 1) + " (epoch " + std::to_string(epoch) +
                              "): " + e.what());
      }
      if (!std::isfinite(bg.loss)) {
        throw DivergenceError("non-finite loss " + std::to_string(bg.loss) + " at step " + std::to_string(step + 1) +
                              " (epoch " + std::to_string(epoch) + ")");
      }
      adamw_step(result.params.tensors(), bg.grads.all(), state, lr, config.weight_decay);
      for (const auto& [name, w] : result.params.tensors()) {
        if (!w.all_finite()) {
          throw DivergenceError("parameter '" + name + "' became non-finite at step " + std::to_string(step + 1));
        }
      }
      ++step;

      const LossRecord record{step, lr, bg.loss, bg.classification, result.params.at("loss.alpha")[0],
                              result.params.at("loss.beta")[0], bg.position_l1, bg.rotation_l1};
      result.log.push_back(record);
      if (outputs.on_step) outputs.on_step(record);
      if (outputs.directory) {
        log_file << format_loss_record(record) << '\n';
        if (step % config.eval_every == 0 && step != total) {
          save_checkpoint(*outputs.directory / ("checkpoint_" + std::to_string(step) + ".ckpt"),
                          make_checkpoint(result.params, step, catalog));
        }
      }
    }
  }
  if (outputs.directory) {
    log_file.flush();
    if (!log_file) throw std::runtime_error("failed writing the loss log");
    save_checkpoint(*outputs.directory / "model.ckpt", make_checkpoint(result.params, step, catalog));
  }
  return result;
}

std::vector<Prediction> predict(const ModelParams& params, std::span<const PoseSample> samples) {
  const ModelConfig& model = params.config();
  const TrainConfig unused;
  std::vector<Prediction> predictions;
  predictions.reserve(samples.size());
  Rng rng(0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor image = prepare_image(samples[i].image, model, unused, Mode::kEval, rng);
    const ModelInput input{&image, samples[i].caption_tokens};
    std::vector<ForwardOutput> out;
    try {
      out = forward(params, std::span(&input, 1), Mode::kEval, rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
    }
    predictions.push_back({head_to_pose(out[0].selected_pose()), out[0].selected});
  }
  return predictions;
}

MetricsReport evaluate_predictions(std::span<const PoseSample> samples, const SceneCatalog& catalog,
                                   std::span<const Prediction> predictions) {
  if (samples.empty()) throw std::invalid_argument("evaluation set is empty");
  if (predictions.size() != samples.size()) {
    throw std::invalid_argument("got " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(samples.size()) + " samples");
  }
  check_samples(samples, catalog);
  std::vector<std::vector<double>> position(catalog.size());
  std::vector<std::vector<double>> rotation(catalog.size());
  std::vector<std::size_t> correct(catalog.size(), 0);
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t k = samples[i].scene_index;
    position[k].push_back(geo::position_error_m(predictions[i].pose.p, samples[i].pose.p));
    rotation[k].push_back(geo::rotation_error_deg(predictions[i].pose.q, samples[i].pose.q));
    if (predictions[i].scene == k) {
      ++correct[k];
      ++total_correct;
    }
  }
  MetricsReport report;
  for (const auto& scene : catalog.scenes()) {
    const std::size_t k = scene.index;
    if (position[k].empty()) continue;
    SceneMetrics m;
    m.index = k;
    m.name = scene.name;
    m.samples = position[k].size();
    m.median_position_m = geo::median(position[k]);
    m.median_rotation_deg = geo::median(rotation[k]);
    m.accuracy = static_cast<double>(correct[k]) / static_cast<double>(m.samples);
    report.average_position_m += m.median_position_m;
    report.average_rotation_deg += m.median_rotation_deg;
    report.scenes.push_back(std::move(m));
  }
  const auto n = static_cast<double>(report.scenes.size());
  report.average_position_m /= n;
  report.average_rotation_deg /= n;
  report.accuracy = static_cast<double>(total_correct) / static_cast<double>(samples.size());
  return report;
}

MetricsReport evaluate(const ModelParams& params, std::span<const PoseSample> samples, const SceneCatalog& catalog) {
  check_samples(samples, catalog);
  if (catalog.size() != params.config().n_scenes) {
    throw std::invalid_argument("catalog has " + std::to_string(catalog.size()) + " scenes but the model has " +
                                std::to_string(params.config().n_scenes));
  }
  const auto predictions = predict(params, samples);
  return evaluate_predictions(samples, catalog, predictions);
}

}  // namespace mvl
