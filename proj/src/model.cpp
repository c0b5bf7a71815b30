#include "mvlloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvlloc/errors.hpp"
#include "mvlloc/ops.hpp"

namespace mvl {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kAlphaInit = -4.0;
constexpr double kBetaInit = -2.0;
constexpr std::size_t kPoseOutputs = 7;
constexpr std::size_t kQuatOffset = 3;

std::string layer_prefix(std::size_t layer) { return "layers." + std::to_string(layer) + "."; }
std::string head_prefix(std::size_t scene) { return "pose." + std::to_string(scene) + "."; }

void add_linear(std::map<std::string, Shape>& shapes, const std::string& prefix, std::size_t in, std::size_t out) {
  shapes[prefix + "weight"] = {in, out};
  shapes[prefix + "bias"] = {out};
}

void add_norm(std::map<std::string, Shape>& shapes, const std::string& prefix, std::size_t d) {
  shapes[prefix + "gain"] = {d};
  shapes[prefix + "bias"] = {d};
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Var linear(const ParamBinder& bind, const Var& x, const std::string& prefix) {
  return ad::add_row(ad::matmul(x, bind(prefix + "weight")), bind(prefix + "bias"));
}

/// Scaled dot-product attention over the rows of `x` with `heads` heads.
Var attention(const ParamBinder& bind, const Var& x, const std::string& prefix, std::size_t heads,
              std::vector<Tensor>* capture) {
  const Var q = linear(bind, x, prefix + "q.");
  const Var k = linear(bind, x, prefix + "k.");
  const Var v = linear(bind, x, prefix + "v.");
  const std::size_t d = x.value().cols();
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : ad::slice_cols(q, h * dh, (h + 1) * dh);
    const Var kh = heads == 1 ? k : ad::slice_cols(k, h * dh, (h + 1) * dh);
    const Var vh = heads == 1 ? v : ad::slice_cols(v, h * dh, (h + 1) * dh);
    const Var weights = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt));
    if (capture) capture->push_back(weights.value());
    outputs.push_back(ad::matmul(weights, vh));
  }
  const Var joined = heads == 1 ? outputs.front() : ad::concat_cols(outputs);
  return linear(bind, joined, prefix + "o.");
}

Var apply_dropout(const Var& x, const ParamBinder& bind, const RunOptions& options) {
  const double rate = bind.config().dropout;
  if (options.mode != Mode::kTrain || rate == 0.0) return x;
  if (!options.rng) throw std::invalid_argument("train-mode forward with dropout needs a generator");
  return ad::dropout(x, rate, *options.rng, true);
}

}  // namespace

double ModelConfig::gamma() const { return 1.0 / std::sqrt(static_cast<double>(width)); }

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string("model.") + key, "must be positive");
  };
  positive(channels, "channels");
  positive(height, "height");
  positive(width, "width");
  positive(patch, "patch");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_scenes, "n_scenes");
  positive(max_caption_len, "max_caption_len");
  if (height % patch != 0) throw ConfigError("model.height", "must be divisible by patch");
  if (width % patch != 0) throw ConfigError("model.width", "must be divisible by patch");
  if (d_model % n_heads != 0) throw ConfigError("model.n_heads", "must divide d_model");
  if (d_model % 4 != 0) throw ConfigError("model.d_model", "must be a multiple of 4 for 2D sinusoidal positions");
  if (std::find(kAllowedDecoderDepths.begin(), kAllowedDecoderDepths.end(), n_layers) == kAllowedDecoderDepths.end()) {
    throw ConfigError("model.n_layers", "must be one of 2, 4, 6, 8 (got " + std::to_string(n_layers) + ")");
  }
  if (vocab < 3) throw ConfigError("model.vocab", "must hold the reserved tokens plus at least one word");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout", "must lie in [0, 1)");
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  const std::size_t k = c.n_scenes;
  return c.channels * c.patch * c.patch * d + d + c.vocab * d + c.n_layers * (8 * d * d + 12 * d) + 8 * d * d +
         7 * d + d * k + k + k * (d * d + 8 * d + 7) + 2;
}

Tensor sinusoidal_table(std::size_t positions, std::size_t width) {
  Tensor table({positions, width});
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t i = 0; 2 * i < width; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      table(pos, 2 * i) = std::sin(angle);
      if (2 * i + 1 < width) table(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return table;
}

Tensor sinusoidal_grid(std::size_t rows, std::size_t cols, std::size_t d) {
  const std::size_t half = d / 2;
  const Tensor row_table = sinusoidal_table(rows, half);
  const Tensor col_table = sinusoidal_table(cols, half);
  Tensor grid({rows * cols, d});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t token = r * cols + c;
      for (std::size_t j = 0; j < half; ++j) {
        grid(token, j) = row_table(r, j);
        grid(token, half + j) = col_table(c, j);
      }
    }
  }
  return grid;
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  std::map<std::string, Shape> shapes;
  add_linear(shapes, "conv.", c.patch_features(), d);
  shapes["token.embedding"] = {c.vocab, d};
  for (std::size_t n = 0; n < c.n_layers; ++n) {
    const std::string p = layer_prefix(n);
    add_norm(shapes, p + "ln1.", d);
    add_norm(shapes, p + "ln2.", d);
    for (const char* block : {"sa.", "mha."}) {
      for (const char* proj : {"q.", "k.", "v.", "o."}) add_linear(shapes, p + block + proj, d, d);
    }
  }
  add_norm(shapes, "ff.ln.", d);
  add_linear(shapes, "ff.fc1.", d, 4 * d);
  add_linear(shapes, "ff.fc2.", 4 * d, d);
  add_linear(shapes, "classifier.", d, c.n_scenes);
  for (std::size_t k = 0; k < c.n_scenes; ++k) {
    add_linear(shapes, head_prefix(k) + "fc1.", d, d);
    add_linear(shapes, head_prefix(k) + "fc2.", d, kPoseOutputs);
  }
  shapes["loss.alpha"] = {1};
  shapes["loss.beta"] = {1};
  return shapes;
}

ModelParams::ModelParams(ModelConfig config, std::map<std::string, Tensor> tensors)
    : config_(std::move(config)),
      tensors_(std::move(tensors)),
      visual_positions_(sinusoidal_grid(config_.grid_rows(), config_.grid_cols(), config_.d_model)),
      text_positions_(sinusoidal_table(config_.max_caption_len, config_.d_model)) {}

ModelParams ModelParams::initialize(const ModelConfig& config, Rng& rng) {
  config.validate();
  std::map<std::string, Tensor> tensors;
  // std::map iteration order fixes the draw order, so init is a pure
  // function of (config, rng state).
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    if (name == "loss.alpha") {
      t[0] = kAlphaInit;
    } else if (name == "loss.beta") {
      t[0] = kBetaInit;
    } else if (ends_with(name, ".gain")) {
      std::fill(t.storage().begin(), t.storage().end(), 1.0);
    } else if (ends_with(name, ".weight") || name == "token.embedding") {
      for (auto& v : t.storage()) v = rng.truncated_normal(kInitStd);
    } else if (name.starts_with("pose.") && ends_with(name, ".fc2.bias")) {
      // Raw quaternions start at the identity, the centre of the log ball.
      t[kQuatOffset] = 1.0;
    }
    tensors.emplace(name, std::move(t));
  }
  return ModelParams(config, std::move(tensors));
}

ModelParams ModelParams::from_tensors(const ModelConfig& config, std::map<std::string, Tensor> tensors) {
  config.validate();
  const auto shapes = parameter_shapes(config);
  if (tensors.size() != shapes.size()) {
    throw std::invalid_argument("expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                                std::to_string(tensors.size()));
  }
  for (const auto& [name, shape] : shapes) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("missing parameter tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw std::invalid_argument("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                                  ", expected " + shape_string(shape));
    }
    it->second.require_finite("parameter " + name);
  }
  return ModelParams(config, std::move(tensors));
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [_, t] : tensors_) total += t.size();
  return total;
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) throw std::invalid_argument("image must be [C x H x W], got " + shape_string(image.shape()));
  const std::size_t c = image.shape()[0];
  const std::size_t h = image.shape()[1];
  const std::size_t w = image.shape()[2];
  if (h % patch != 0 || w % patch != 0) throw std::invalid_argument("image size not divisible by patch");
  const std::size_t gr = h / patch;
  const std::size_t gc = w / patch;
  Tensor out({gr * gc, c * patch * patch});
  for (std::size_t r = 0; r < gr; ++r) {
    for (std::size_t col = 0; col < gc; ++col) {
      double* dst = out.data().data() + (r * gc + col) * c * patch * patch;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx)
            *dst++ = image[(ch * h + r * patch + dy) * w + col * patch + dx];
    }
  }
  return out;
}

Var encode_image(const ParamBinder& bind, const Tensor& image) {
  const auto& c = bind.config();
  if (image.shape() != Shape{c.channels, c.height, c.width}) {
    throw std::invalid_argument("image shape " + shape_string(image.shape()) + " does not match configured " +
                                shape_string({c.channels, c.height, c.width}));
  }
  GradientTape& tape = bind.tape();
  const Var patches = tape.constant(patchify(image, c.patch));
  const Var embedded = linear(bind, patches, "conv.");
  Tensor pos = bind.params().visual_positions();
  for (auto& v : pos.storage()) v *= c.gamma();
  return ad::add(embedded, tape.constant(std::move(pos)));
}

Var encode_text(const ParamBinder& bind, std::span<const int> tokens) {
  const auto& c = bind.config();
  if (tokens.empty() || tokens.size() > c.max_caption_len) {
    throw std::invalid_argument("caption length " + std::to_string(tokens.size()) + " outside [1, " +
                                std::to_string(c.max_caption_len) + "]");
  }
  for (int id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(c.vocab));
    }
  }
  const Var rows = ad::gather_rows(bind("token.embedding"), tokens);
  const Tensor& table = bind.params().text_positions();
  Tensor pos({tokens.size(), c.d_model});
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = table[i] * c.gamma();
  return ad::add(rows, bind.tape().constant(std::move(pos)));
}

Var fuse_modalities(const Var& visual, const Var& language, Tensor* similarity_weights) {
  const std::size_t d = visual.value().cols();
  if (language.value().cols() != d) {
    throw std::invalid_argument("fusion width mismatch: visual " + shape_string(visual.shape()) + " vs language " +
                                shape_string(language.shape()));
  }
  const Var weights =
      ad::softmax_rows(ad::scale(ad::matmul_nt(visual, language), 1.0 / std::sqrt(static_cast<double>(d))));
  if (similarity_weights) *similarity_weights = weights.value();
  const Var context = ad::matmul(weights, language);
  return ad::concat_rows(ad::add(visual, context), language);
}

Var decoder_layer(const ParamBinder& bind, const Var& x, std::size_t layer, const RunOptions& options) {
  const auto& c = bind.config();
  const std::string p = layer_prefix(layer);
  LayerAttention* capture = nullptr;
  if (options.attention) capture = &options.attention->emplace_back();

  std::vector<Tensor> sa_weights;
  const Var normed1 = ad::layer_norm(x, bind(p + "ln1.gain"), bind(p + "ln1.bias"), ops::kLayerNormEps);
  const Var sa = attention(bind, normed1, p + "sa.", 1, capture ? &sa_weights : nullptr);
  const Var x1 = ad::add(x, apply_dropout(sa, bind, options));

  const Var normed2 = ad::layer_norm(x1, bind(p + "ln2.gain"), bind(p + "ln2.bias"), ops::kLayerNormEps);
  const Var mha = attention(bind, normed2, p + "mha.", c.n_heads, capture ? &capture->heads : nullptr);
  if (capture) capture->self_attention = std::move(sa_weights.front());
  return ad::add(x1, apply_dropout(mha, bind, options));
}

Var final_feedforward(const ParamBinder& bind, const Var& x, const RunOptions& options) {
  const Var normed = ad::layer_norm(x, bind("ff.ln.gain"), bind("ff.ln.bias"), ops::kLayerNormEps);
  const Var hidden = ad::gelu(linear(bind, normed, "ff.fc1."));
  const Var out = linear(bind, hidden, "ff.fc2.");
  return ad::add(x, apply_dropout(out, bind, options));
}

Var pool_visual(const Var& features, std::size_t visual_tokens) { return ad::mean_rows(features, 0, visual_tokens); }

Var classify_scene(const ParamBinder& bind, const Var& pooled) { return linear(bind, pooled, "classifier."); }

Var regress_pose(const ParamBinder& bind, const Var& pooled, std::size_t scene) {
  if (scene >= bind.config().n_scenes) {
    throw std::out_of_range("pose head " + std::to_string(scene) + " out of range for " +
                            std::to_string(bind.config().n_scenes) + " scenes");
  }
  const std::string p = head_prefix(scene);
  return linear(bind, ad::gelu(linear(bind, pooled, p + "fc1.")), p + "fc2.");
}

TapeForward forward_on_tape(const ParamBinder& bind, const ModelInput& input, const RunOptions& options,
                            std::optional<std::size_t> routed_scene) {
  const auto& c = bind.config();
  if (!input.image) throw std::invalid_argument("model input without an image");
  const Var visual = encode_image(bind, *input.image);
  const Var language = encode_text(bind, input.tokens);
  Var x = fuse_modalities(visual, language);
  for (std::size_t n = 0; n < c.n_layers; ++n) x = decoder_layer(bind, x, n, options);
  x = final_feedforward(bind, x, options);
  const Var pooled = pool_visual(x, c.visual_tokens());

  TapeForward out;
  out.logits = classify_scene(bind, pooled);
  out.heads.reserve(c.n_scenes);
  for (std::size_t k = 0; k < c.n_scenes; ++k) out.heads.push_back(regress_pose(bind, pooled, k));

  if (options.mode == Mode::kTrain) {
    if (!routed_scene) throw std::invalid_argument("train-mode forward needs the ground-truth scene index");
    if (*routed_scene >= c.n_scenes) {
      throw std::out_of_range("scene index " + std::to_string(*routed_scene) + " out of range");
    }
    out.selected = *routed_scene;
  } else {
    const auto logits = out.logits.value().data();
    out.selected = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  return out;
}

std::vector<ForwardOutput> forward(const ModelParams& params, std::span<const ModelInput> batch, Mode mode, Rng& rng,
                                   std::span<const std::size_t> routed_scenes, bool capture_attention) {
  if (batch.empty()) throw std::invalid_argument("forward on an empty batch");
  if (mode == Mode::kTrain && routed_scenes.size() != batch.size()) {
    throw std::invalid_argument("train-mode forward needs one routed scene per sample");
  }
  std::vector<ForwardOutput> outputs;
  outputs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      GradientTape tape;
      ParamBinder bind(tape, params);
      ForwardOutput out;
      Rng sample_rng = rng.split(i);
      RunOptions options{mode, &sample_rng, capture_attention ? &out.attention : nullptr};
      std::optional<std::size_t> routed;
      if (mode == Mode::kTrain) routed = routed_scenes[i];
      TapeForward tf = forward_on_tape(bind, batch[i], options, routed);
      out.logits = tf.logits.value().reshaped({params.config().n_scenes});
      out.probabilities = ops::softmax(out.logits);
      out.selected = tf.selected;
      for (const auto& head : tf.heads) {
        const Tensor& h = head.value();
        out.heads.push_back({{h[0], h[1], h[2]}, {h[3], h[4], h[5], h[6]}});
      }
      outputs.push_back(std::move(out));
    } catch (const std::exception& e) {
      throw std::runtime_error("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return outputs;
}

geo::Pose head_to_pose(const HeadPose& head) {
  const auto [q, degenerate] = geo::normalize(head.q_raw[0], head.q_raw[1], head.q_raw[2], head.q_raw[3]);
  (void)degenerate;
  return {head.p, geo::canonicalize_hemisphere(q)};
}

}  // namespace mvl
