#include "mvlloc/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "mvlloc/errors.hpp"

namespace mvl {

namespace {

using json = nlohmann::json;

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

std::size_t as_size(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
  throw ConfigError(key, "expected a non-negative integer, got " + v.dump());
}

std::uint64_t as_u64(const std::string& key, const json& v) { return as_size(key, v); }

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key, "expected a finite number");
  return d;
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError(key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

template <typename Field>
KeySpec size_key(std::string key, Field field) {
  return {key, [key, field](RunConfig& c, const json& v) { field(c) = as_size(key, v); },
          [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
KeySpec double_key(std::string key, Field field) {
  return {key, [key, field](RunConfig& c, const json& v) { field(c) = as_double(key, v); },
          [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); }};
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> s;
    s.push_back(size_key("model.channels", [](RunConfig& c) -> std::size_t& { return c.model.channels; }));
    s.push_back(size_key("model.height", [](RunConfig& c) -> std::size_t& { return c.model.height; }));
    s.push_back(size_key("model.width", [](RunConfig& c) -> std::size_t& { return c.model.width; }));
    s.push_back(size_key("model.patch", [](RunConfig& c) -> std::size_t& { return c.model.patch; }));
    s.push_back(size_key("model.d_model", [](RunConfig& c) -> std::size_t& { return c.model.d_model; }));
    s.push_back(size_key("model.n_heads", [](RunConfig& c) -> std::size_t& { return c.model.n_heads; }));
    s.push_back(size_key("model.n_layers", [](RunConfig& c) -> std::size_t& { return c.model.n_layers; }));
    s.push_back(size_key("model.n_scenes", [](RunConfig& c) -> std::size_t& { return c.model.n_scenes; }));
    s.push_back(size_key("model.vocab", [](RunConfig& c) -> std::size_t& { return c.model.vocab; }));
    s.push_back(size_key("model.max_caption_len", [](RunConfig& c) -> std::size_t& { return c.model.max_caption_len; }));

    s.push_back(double_key("train.lr0", [](RunConfig& c) -> double& { return c.train.lr0; }));
    s.push_back(double_key("train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; }));
    s.push_back(size_key("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
    s.push_back(size_key("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
    s.push_back(double_key("train.dropout", [](RunConfig& c) -> double& { return c.train.dropout; }));
    s.push_back({"train.seed", [](RunConfig& c, const json& v) { c.train.seed = as_u64("train.seed", v); },
                 [](const RunConfig& c) { return json(c.train.seed); }});
    s.push_back(size_key("train.eval_every", [](RunConfig& c) -> std::size_t& { return c.train.eval_every; }));
    s.push_back({"train.color_jitter",
                 [](RunConfig& c, const json& v) { c.train.color_jitter = as_bool("train.color_jitter", v); },
                 [](const RunConfig& c) { return json(c.train.color_jitter); }});
    s.push_back(double_key("train.jitter.brightness", [](RunConfig& c) -> double& { return c.train.jitter.brightness; }));
    s.push_back(double_key("train.jitter.contrast", [](RunConfig& c) -> double& { return c.train.jitter.contrast; }));
    s.push_back(double_key("train.jitter.saturation", [](RunConfig& c) -> double& { return c.train.jitter.saturation; }));
    s.push_back(double_key("train.jitter.hue", [](RunConfig& c) -> double& { return c.train.jitter.hue; }));

    s.push_back({"data.catalog", [](RunConfig& c, const json& v) { c.data.catalog = as_string("data.catalog", v); },
                 [](const RunConfig& c) { return json(c.data.catalog); }});
    s.push_back(size_key("data.scenes", [](RunConfig& c) -> std::size_t& { return c.data.scenes; }));
    s.push_back(
        size_key("data.samples_per_scene", [](RunConfig& c) -> std::size_t& { return c.data.samples_per_scene; }));
    s.push_back({"data.seed", [](RunConfig& c, const json& v) { c.data.seed = as_u64("data.seed", v); },
                 [](const RunConfig& c) { return json(c.data.seed); }});
    s.push_back(size_key("data.image_height", [](RunConfig& c) -> std::size_t& { return c.data.image_height; }));
    s.push_back(size_key("data.image_width", [](RunConfig& c) -> std::size_t& { return c.data.image_width; }));
    s.push_back({"data.dataset", [](RunConfig& c, const json& v) { c.data.dataset = as_string("data.dataset", v); },
                 [](const RunConfig& c) { return json(c.data.dataset); }});

    s.push_back({"paths.output", [](RunConfig& c, const json& v) { c.output = as_string("paths.output", v); },
                 [](const RunConfig& c) { return json(c.output.string()); }});
    return s;
  }();
  return specs;
}

const KeySpec& find_key(const std::string& key) {
  for (const auto& spec : key_specs())
    if (spec.key == key) return spec;
  throw ConfigError(key, "unknown configuration key");
}

void apply_object(RunConfig& config, const json& node, const std::string& prefix) {
  for (const auto& [name, value] : node.items()) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (value.is_object()) {
      apply_object(config, value, key);
    } else {
      find_key(key).set(config, value);
    }
  }
}

RunConfig defaults() {
  RunConfig c;
  c.model.n_scenes = 0;  // taken from the catalog unless set
  c.output = default_output_root();
  return c;
}

}  // namespace

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& spec : key_specs()) keys.push_back(spec.key);
  return keys;
}

std::filesystem::path default_output_root() {
  const char* env = std::getenv("MVLLOC_OUTPUT_ROOT");
  if (env && *env) return env;
  return "runs";
}

SceneCatalog RunConfig::catalog() const {
  SceneCatalog full;
  if (data.catalog == "7scenes") {
    full = SceneCatalog::seven_scenes();
  } else if (data.catalog == "cambridge") {
    full = SceneCatalog::cambridge_landmarks();
  } else {
    try {
      full = load_catalog_json(data.catalog);
    } catch (const std::exception& e) {
      throw ConfigError("data.catalog", e.what());
    }
  }
  if (data.scenes == 0) return full;
  if (data.scenes > full.size()) {
    throw ConfigError("data.scenes", "catalog has only " + std::to_string(full.size()) + " scenes");
  }
  return full.prefix(data.scenes);
}

std::filesystem::path RunConfig::dataset_path() const {
  return data.dataset.empty() ? output / "dataset" : std::filesystem::path(data.dataset);
}

void RunConfig::finalize() {
  if (output.empty()) throw ConfigError("paths.output", "must not be empty");
  if (data.samples_per_scene == 0) throw ConfigError("data.samples_per_scene", "must be at least 1");
  if ((data.image_height == 0) != (data.image_width == 0)) {
    throw ConfigError(data.image_height == 0 ? "data.image_height" : "data.image_width",
                      "set both image dimensions or neither");
  }
  const SceneCatalog cat = catalog();
  if (model.n_scenes == 0) {
    model.n_scenes = cat.size();
  } else if (model.n_scenes != cat.size()) {
    throw ConfigError("model.n_scenes", "is " + std::to_string(model.n_scenes) + " but the catalog has " +
                                            std::to_string(cat.size()) + " scenes");
  }
  const std::size_t needed = build_vocab(cat).size();
  if (model.vocab == 0) {
    model.vocab = needed;
  } else if (model.vocab < needed) {
    throw ConfigError("model.vocab", "catalog captions need " + std::to_string(needed) + " tokens");
  }
  model.dropout = train.dropout;
  train.validate();
  model.validate();
  if (data.image_height != 0) {
    if (data.image_height < model.height || data.image_width < model.width) {
      throw ConfigError("data.image_height", "images must be at least as large as the model input");
    }
    if ((data.image_height != model.height || data.image_width != model.width) && model.height != model.width) {
      throw ConfigError("data.image_height", "cropping needs a square model input");
    }
  }
}

RunConfig parse_run_config(std::string_view text, std::span<const std::string> overrides) {
  RunConfig config = defaults();
  if (!text.empty()) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
    apply_object(config, doc, "");
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(item, "override must look like key=value");
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    find_key(key).set(config, value);
  }
  config.finalize();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("config", e.what());
  }
  return parse_run_config(text, overrides);
}

std::string run_config_to_json(const RunConfig& config) {
  json doc = json::object();
  for (const auto& spec : key_specs()) doc[json::json_pointer("/" + [&] {
    std::string p = spec.key;
    for (auto& ch : p)
      if (ch == '.') ch = '/';
    return p;
  }())] = spec.get(config);
  return doc.dump(2) + "\n";
}

}  // namespace mvl
