#include "mvlloc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "binary_io.hpp"
#include "mvlloc/checkpoint.hpp"
#include "mvlloc/errors.hpp"
#include "mvlloc/training.hpp"

namespace mvl {

namespace {

void require_dataset(const std::filesystem::path& path, const char* key) {
  if (!std::filesystem::exists(path / "dataset.txt")) {
    throw ConfigError(key, "no dataset at '" + path.string() + "' (run gen-data first)");
  }
}

void require_same_catalog(const SceneCatalog& expected, const SceneCatalog& found, const std::string& what) {
  if (expected == found) return;
  std::string detail = "has " + std::to_string(found.size()) + " scenes, expected " + std::to_string(expected.size());
  for (std::size_t k = 0; k < std::min(expected.size(), found.size()); ++k) {
    if (!(expected.at(k) == found.at(k))) {
      detail = "scene " + std::to_string(k) + " is '" + found.at(k).name + "', expected '" + expected.at(k).name + "'";
      break;
    }
  }
  throw std::invalid_argument(what + " does not match: " + detail);
}

}  // namespace

std::string cmd_gen_data(const RunConfig& config, std::ostream& out) {
  const SceneCatalog catalog = config.catalog();
  SyntheticSpec spec;
  spec.height = config.data.image_height ? config.data.image_height : config.model.height;
  spec.width = config.data.image_width ? config.data.image_width : config.model.width;
  spec.max_caption_len = config.model.max_caption_len;
  if (config.model.channels != 3) throw ConfigError("model.channels", "the synthetic renderer produces 3 channels");
  Dataset ds{catalog, generate_synthetic(config.data.seed, catalog, config.data.samples_per_scene, spec),
             config.data.seed};
  const auto root = config.dataset_path();
  const std::string digest = write_dataset(root, ds);
  out << "wrote " << ds.samples.size() << " samples in " << catalog.size() << " scenes to " << root.string() << "\n";
  out << "digest " << digest << "\n";
  return digest;
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  const auto root = config.dataset_path();
  require_dataset(root, "data.dataset");
  const Dataset ds = read_dataset(root, config.model.max_caption_len);
  require_same_catalog(config.catalog(), ds.catalog, "dataset catalog at " + root.string());

  std::filesystem::create_directories(config.output);
  detail::write_file(config.output / "config.json", run_config_to_json(config));
  TrainOutputs outputs;
  outputs.directory = config.output;
  const std::uint64_t total = total_train_steps(ds.samples.size(), config.train);
  const std::uint64_t every = std::max<std::uint64_t>(1, total / 20);
  outputs.on_step = [&](const LossRecord& r) {
    if (r.step % every == 0 || r.step == total) {
      out << "step " << r.step << "/" << total << " loss " << r.loss << " alpha " << r.alpha << " beta " << r.beta
          << "\n";
    }
  };
  train(config.model, config.train, ds.samples, ds.catalog, outputs);
  out << "checkpoint " << (config.output / "model.ckpt").string() << "\n";
}

MetricsReport cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out) {
  const auto root = options.dataset.value_or(config.dataset_path());
  require_dataset(root, "data.dataset");
  MetricsReport report;
  if (options.echo_ground_truth) {
    const Dataset ds = read_dataset(root, config.model.max_caption_len);
    std::vector<Prediction> echo;
    for (const auto& s : ds.samples) echo.push_back({s.pose, s.scene_index});
    report = evaluate_predictions(ds.samples, ds.catalog, echo);
  } else {
    const Checkpoint ck = load_checkpoint(options.checkpoint);
    const ModelParams params = restore_params(ck);
    const Dataset ds = read_dataset(root, params.config().max_caption_len);
    require_same_catalog(ck.catalog, ds.catalog, "dataset catalog at " + root.string());
    for (const auto& s : ds.samples) {
      if (s.image.rank() != 3 || s.image.shape()[0] != params.config().channels ||
          s.image.shape()[1] < params.config().height || s.image.shape()[2] < params.config().width) {
        throw std::invalid_argument("dataset image shape " + shape_string(s.image.shape()) +
                                    " is incompatible with the checkpoint input " +
                                    std::to_string(params.config().channels) + "x" +
                                    std::to_string(params.config().height) + "x" +
                                    std::to_string(params.config().width));
      }
    }
    report = evaluate(params, ds.samples, ds.catalog);
  }
  const auto report_path = options.report.value_or(config.output / "report.txt");
  if (report_path.has_parent_path()) std::filesystem::create_directories(report_path.parent_path());
  detail::write_file(report_path, format_report(report));
  out << format_report_table(report);
  out << "report " << report_path.string() << "\n";
  return report;
}

Comparison cmd_compare(const std::filesystem::path& report, const std::string& fixture, const std::string& method,
                       std::ostream& out) {
  const MetricsReport r = parse_report(detail::read_file(report));
  const Comparison c = compare_report(r, FixtureTable::by_name(fixture), method);
  out << format_comparison(c);
  return c;
}

std::vector<Tensor> attention_maps(const LayerAttention& layer, std::size_t grid_rows, std::size_t grid_cols) {
  const std::size_t nv = grid_rows * grid_cols;
  std::vector<Tensor> maps;
  for (const Tensor& weights : layer.heads) {
    if (weights.rank() != 2 || weights.cols() < nv) {
      throw std::invalid_argument("attention matrix " + shape_string(weights.shape()) + " has fewer than " +
                                  std::to_string(nv) + " keys");
    }
    Tensor map({grid_rows, grid_cols});
    const std::size_t queries = weights.rows();
    for (std::size_t q = 0; q < queries; ++q)
      for (std::size_t k = 0; k < nv; ++k) map[k] += weights(q, k);
    for (auto& v : map.storage()) v /= static_cast<double>(queries);
    maps.push_back(std::move(map));
  }
  return maps;
}

std::string encode_pgm(const Tensor& map, std::size_t scale) {
  if (map.rank() != 2 || scale == 0) throw std::invalid_argument("encode_pgm needs a matrix and a positive scale");
  const auto [lo_it, hi_it] = std::minmax_element(map.storage().begin(), map.storage().end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  const std::size_t rows = map.rows() * scale;
  const std::size_t cols = map.cols() * scale;
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      const double v = map(y / scale, x / scale);
      const double unit = range > 0.0 ? (v - lo) / range : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * unit))));
    }
  }
  return out;
}

std::vector<std::filesystem::path> cmd_export_attention(const std::filesystem::path& checkpoint,
                                                        const std::filesystem::path& dataset, std::size_t sample,
                                                        const std::filesystem::path& out_dir, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const ModelParams params = restore_params(ck);
  const ModelConfig& c = params.config();
  require_dataset(dataset, "data.dataset");
  const Dataset ds = read_dataset(dataset, c.max_caption_len);
  if (sample >= ds.samples.size()) {
    throw std::out_of_range("sample " + std::to_string(sample) + " outside a dataset of " +
                            std::to_string(ds.samples.size()));
  }
  const PoseSample& s = ds.samples[sample];
  Rng rng(0);
  const TrainConfig no_augment;
  const Tensor image = prepare_image(s.image, c, no_augment, Mode::kEval, rng);
  const ModelInput input{&image, s.caption_tokens};
  const auto result = forward(params, std::span(&input, 1), Mode::kEval, rng, {}, true);

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t layer = 0; layer < result[0].attention.size(); ++layer) {
    const auto maps = attention_maps(result[0].attention[layer], c.grid_rows(), c.grid_cols());
    for (std::size_t h = 0; h < maps.size(); ++h) {
      const auto path = out_dir / ("layer" + std::to_string(layer) + "_head" + std::to_string(h) + ".pgm");
      detail::write_file(path, encode_pgm(maps[h], c.patch));
      written.push_back(path);
    }
  }
  out << "wrote " << written.size() << " attention maps to " << out_dir.string() << "\n";
  return written;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scene language-guided camera pose regression"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration");
    sub->add_option("--set", overrides, "Override a key, e.g. --set train.lr0=1e-3")->take_all();
  };

  auto* gen = app.add_subcommand("gen-data", "Write the seeded synthetic dataset");
  add_config(gen);
  std::optional<std::uint64_t> seed;
  gen->add_option("--seed", seed, "Dataset seed (overrides data.seed)");

  auto* trn = app.add_subcommand("train", "Train a model");
  add_config(trn);

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_config(evl);
  EvalOptions eval_options;
  std::string eval_dataset;
  std::string eval_report;
  evl->add_option("--checkpoint", eval_options.checkpoint, "Checkpoint file (default <output>/model.ckpt)");
  evl->add_option("--dataset", eval_dataset, "Dataset directory (default from the config)");
  evl->add_option("--report", eval_report, "Report path (default <output>/report.txt)");
  evl->add_flag("--echo-ground-truth", eval_options.echo_ground_truth, "Score ground truth against itself");

  auto* cmp = app.add_subcommand("compare", "Compare a report with published results");
  std::string report_path;
  std::string fixture = "7scenes";
  std::string method = "MVL-Loc";
  cmp->add_option("--report", report_path, "Report written by eval")->required();
  cmp->add_option("--fixture", fixture, "7scenes or cambridge")->capture_default_str();
  cmp->add_option("--method", method, "Published method to compare against")->capture_default_str();

  auto* exp = app.add_subcommand("export-attention", "Write attention maps as PGM images");
  add_config(exp);
  std::string exp_checkpoint;
  std::string exp_dataset;
  std::string exp_out;
  std::size_t exp_sample = 0;
  exp->add_option("--checkpoint", exp_checkpoint, "Checkpoint file (default <output>/model.ckpt)");
  exp->add_option("--dataset", exp_dataset, "Dataset directory (default from the config)");
  exp->add_option("--sample", exp_sample, "Dataset sample index")->capture_default_str();
  exp->add_option("--out", exp_out, "Output directory (default <output>/attention)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream help_out;
    std::ostringstream help_err;
    const int code = app.exit(e, help_out, help_err);
    out << help_out.str();
    err << help_err.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto load = [&] {
      if (seed) overrides.push_back("data.seed=" + std::to_string(*seed));
      return config_path.empty() ? parse_run_config("", overrides) : load_run_config(config_path, overrides);
    };
    if (gen->parsed()) {
      cmd_gen_data(load(), out);
    } else if (trn->parsed()) {
      cmd_train(load(), out);
    } else if (evl->parsed()) {
      const RunConfig config = load();
      if (eval_options.checkpoint.empty()) eval_options.checkpoint = config.output / "model.ckpt";
      if (!eval_dataset.empty()) eval_options.dataset = eval_dataset;
      if (!eval_report.empty()) eval_options.report = eval_report;
      cmd_eval(config, eval_options, out);
    } else if (cmp->parsed()) {
      cmd_compare(report_path, fixture, method, out);
    } else if (exp->parsed()) {
      const RunConfig config = load();
      const std::filesystem::path ckpt = exp_checkpoint.empty() ? config.output / "model.ckpt" : std::filesystem::path(exp_checkpoint);
      const std::filesystem::path data = exp_dataset.empty() ? config.dataset_path() : std::filesystem::path(exp_dataset);
      const std::filesystem::path dir = exp_out.empty() ? config.output / "attention" : std::filesystem::path(exp_out);
      cmd_export_attention(ckpt, data, exp_sample, dir, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace mvl
