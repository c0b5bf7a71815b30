#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mvlloc/checkpoint.hpp"
#include "mvlloc/cli.hpp"
#include "mvlloc/errors.hpp"
#include "mvlloc/loss.hpp"
#include "mvlloc/pose_io.hpp"
#include "mvlloc/training.hpp"

namespace mvl {
namespace {

// Pinned tolerances and limits.
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kGradientRelTol = 1e-4;
// Relative errors are taken against max(|analytic|, |numeric|, floor): for
// gradients below the floor the check becomes an absolute bound of
// kGradientRelTol * floor, above the round-off of a central difference.
constexpr double kGradientFloor = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr double kQuatTol = 1e-9;
constexpr double kLossTol = 1e-12;
constexpr double kLogKTol = 1e-9;
constexpr double kShiftTol = 1e-12;
constexpr double kOverfitPosition = 0.05;
constexpr double kOverfitRotationDeg = 2.0;
constexpr double kOverfitAccuracy = 1.0;
constexpr double kOverfitInitialAlpha = -4.0;
constexpr std::size_t kOverfitMaxSteps = 2000;
constexpr double kOverfitSeconds = 600.0;
constexpr double kIngestTol = 1e-9;
constexpr double kDecayTol = 1e-15;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig desk_config(std::size_t scenes) {
  ModelConfig m;
  m.height = 64;
  m.width = 64;
  m.patch = 8;
  m.d_model = 64;
  m.n_heads = 4;
  m.n_layers = 4;
  m.n_scenes = scenes;
  m.vocab = build_vocab(SceneCatalog::seven_scenes().prefix(scenes)).size();
  return m;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// 1. Analytic gradients of the multi-scene loss against central differences.
Outcome gradient_correctness() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const SceneCatalog catalog = SceneCatalog::seven_scenes().prefix(2);
  const auto samples = generate_synthetic(3, catalog, 1, SyntheticSpec{32, 32, 32});
  ModelConfig m;
  m.height = m.width = 32;
  m.patch = 8;
  m.d_model = 16;
  m.n_heads = 2;
  m.n_layers = 2;
  m.n_scenes = 2;
  m.vocab = build_vocab(catalog).size();
  m.dropout = 0.5;
  Rng init(11);
  ModelParams params = ModelParams::initialize(m, init);
  const PoseSample* sample = &samples[1];
  const ModelInput input{&sample->image, sample->caption_tokens};
  const Rng dropout_rng(5);
  auto loss_at = [&] { return batch_gradients(params, std::span(&input, 1), std::span(&sample, 1), dropout_rng); };

  const BatchGradients base = loss_at();

  double worst = 0.0;
  std::string worst_at;
  std::size_t checked = 0;
  for (auto& [name, tensor] : params.tensors()) {
    const Tensor& analytic = base.grads.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double w = tensor[i];
      tensor[i] = w + kFiniteDifferenceStep;
      const double plus = loss_at().loss;
      tensor[i] = w - kFiniteDifferenceStep;
      const double minus = loss_at().loss;
      tensor[i] = w;
      const double numeric = (plus - minus) / (2.0 * kFiniteDifferenceStep);
      const double rel =
          std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), kGradientFloor});
      if (rel > worst) {
        worst = rel;
        worst_at = name + "[" + std::to_string(i) + "]";
      }
      ++checked;
    }
  }
  const double elapsed = seconds_since(t0);
  o.check(checked == params.parameter_count(), "every parameter visited");
  o.check(worst < kGradientRelTol, "max relative error " + fmt("%.3e", worst) + " at " + worst_at);
  o.check(elapsed < kGradientSeconds, "runtime " + fmt("%.1f", elapsed) + " s");
  o.note(std::to_string(checked) + " parameters, max rel err " + fmt("%.2e", worst) + " at " + worst_at + ", " +
         fmt("%.1f", elapsed) + " s");
  return o;
}

// 2. Quaternion utilities.
Outcome quaternion_suite() {
  Outcome o;
  Rng rng(2024);
  double worst_exp_log = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const geo::Quaternion q =
        geo::canonicalize_hemisphere(geo::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal()).q);
    const geo::Quaternion back = geo::quat_exp(geo::quat_log(q));
    worst_exp_log = std::max({worst_exp_log, std::abs(back.w - q.w), std::abs(back.v[0] - q.v[0]),
                              std::abs(back.v[1] - q.v[1]), std::abs(back.v[2] - q.v[2])});
  }
  o.check(worst_exp_log < kQuatTol, "exp(log q) error " + fmt("%.2e", worst_exp_log));

  bool sign_exact = true;
  for (int i = 0; i < 1000; ++i) {
    const geo::Quaternion q = geo::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal()).q;
    sign_exact = sign_exact && geo::rotation_error_deg(q, -q) == 0.0;
  }
  o.check(sign_exact, "rotation_error(q, -q) == 0");

  const geo::LogQuaternion u = geo::quat_log(geo::Quaternion::identity());
  o.check(u[0] == 0.0 && u[1] == 0.0 && u[2] == 0.0, "log(identity) == 0");

  double worst_matrix = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const geo::Quaternion q = geo::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal()).q;
    const geo::Mat3 r = geo::quat_to_matrix(q);
    const geo::Mat3 back = geo::quat_to_matrix(geo::rotation_matrix_to_quat(r));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) worst_matrix = std::max(worst_matrix, std::abs(back[a][b] - r[a][b]));
  }
  o.check(worst_matrix < kQuatTol, "matrix round trip error " + fmt("%.2e", worst_matrix));
  o.note("exp/log " + fmt("%.1e", worst_exp_log) + ", matrix " + fmt("%.1e", worst_matrix));
  return o;
}

// 3. Loss algebra at the initial weights.
Outcome loss_algebra() {
  Outcome o;
  const PoseTarget target{{0.3, -0.1, 0.2}, geo::canonicalize_hemisphere(geo::normalize(0.8, 0.3, -0.2, 0.4).q), 0};
  const std::vector<double> certain{0.0, -1000.0, -1000.0};
  const double value = pose_loss_value(target.position, target.orientation, target, -4.0, -2.0, certain);
  o.check(std::abs(value + 6.0) <= kLossTol, "zero-residual loss " + fmt("%.17g", value));

  GradientTape tape;
  const Var uniform = tape.constant(Tensor({1, 7}, 0.0));
  const double cls = classification_loss(uniform, 4).value().item();
  o.check(std::abs(cls - std::log(7.0)) <= kLogKTol, "uniform classification loss " + fmt("%.17g", cls));

  Rng rng(3);
  double worst_shift = 0.0;
  for (int i = 0; i < 100; ++i) {
    Tensor z({1, 7});
    for (auto& v : z.storage()) v = 4.0 * rng.normal();
    Tensor shifted = z;
    const double c = rng.uniform(-100.0, 100.0);
    for (auto& v : shifted.storage()) v += c;
    const auto k = static_cast<std::size_t>(rng.below(7));
    const double a = classification_loss(tape.constant(z), k).value().item();
    const double b = classification_loss(tape.constant(shifted), k).value().item();
    worst_shift = std::max(worst_shift, std::abs(a - b));
  }
  o.check(worst_shift <= kShiftTol, "shift invariance error " + fmt("%.2e", worst_shift));
  o.note("L=" + fmt("%.15g", value) + ", ln7 err " + fmt("%.1e", std::abs(cls - std::log(7.0))) + ", shift err " +
         fmt("%.1e", worst_shift));
  return o;
}

// 4. Overfit run on the desk-scale configuration.
Outcome overfit_run() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const SceneCatalog catalog = SceneCatalog::seven_scenes().prefix(3);
  const auto samples = generate_synthetic(7, catalog, 32, SyntheticSpec{64, 64, 32});
  TrainConfig t;
  t.lr0 = 2e-3;
  t.weight_decay = 4e-5;
  t.batch_size = 16;
  t.epochs = 333;
  t.dropout = 0.0;
  t.color_jitter = false;
  t.seed = 0;
  const std::uint64_t steps = total_train_steps(samples.size(), t);
  o.check(steps <= kOverfitMaxSteps, std::to_string(steps) + " steps");
  const TrainResult r = train(desk_config(3), t, samples, catalog);
  const MetricsReport rep = evaluate(r.params, samples, catalog);
  const double elapsed = seconds_since(t0);

  double worst_pos = 0.0;
  double worst_rot = 0.0;
  for (const auto& s : rep.scenes) {
    worst_pos = std::max(worst_pos, s.median_position_m);
    worst_rot = std::max(worst_rot, s.median_rotation_deg);
  }
  const double alpha = r.params.at("loss.alpha")[0];
  o.check(rep.accuracy >= kOverfitAccuracy, "accuracy " + fmt("%.4f", rep.accuracy));
  o.check(worst_pos < kOverfitPosition, "median position error " + fmt("%.4g", worst_pos));
  o.check(worst_rot < kOverfitRotationDeg, "median rotation error " + fmt("%.4g", worst_rot) + " deg");
  o.check(alpha < kOverfitInitialAlpha, "alpha " + fmt("%.4f", alpha) + " not below " + fmt("%.1f", kOverfitInitialAlpha));
  o.check(elapsed < kOverfitSeconds, "runtime " + fmt("%.0f", elapsed) + " s");
  o.note(std::to_string(steps) + " steps, accuracy " + fmt("%.3f", rep.accuracy) + ", worst scene median " +
         fmt("%.4g", worst_pos) + " / " + fmt("%.3g", worst_rot) + " deg, alpha " + fmt("%.3f", alpha) + ", beta " +
         fmt("%.3f", r.params.at("loss.beta")[0]) + ", " + fmt("%.0f", elapsed) + " s");
  return o;
}

// 5. Ground-truth routing in training, argmax routing in evaluation.
Outcome routing_invariants() {
  Outcome o;
  const SceneCatalog catalog = SceneCatalog::seven_scenes().prefix(3);
  const auto samples = generate_synthetic(5, catalog, 4, SyntheticSpec{32, 32, 32});
  ModelConfig m = desk_config(3);
  m.height = m.width = 32;
  m.dropout = 0.5;
  Rng init(1);
  ModelParams params = ModelParams::initialize(m, init);

  std::size_t zero_checks = 0;
  for (std::size_t excluded = 0; excluded < 3; ++excluded) {
    std::vector<ModelInput> inputs;
    std::vector<const PoseSample*> batch;
    for (const auto& s : samples) {
      if (s.scene_index == excluded) continue;
      inputs.push_back({&s.image, s.caption_tokens});
      batch.push_back(&s);
    }
    const BatchGradients bg = batch_gradients(params, inputs, batch, Rng(excluded));
    const std::string prefix = "pose." + std::to_string(excluded) + ".";
    for (const auto& [name, g] : bg.grads.all()) {
      const bool zero = std::all_of(g.storage().begin(), g.storage().end(), [](double v) { return v == 0.0; });
      if (name.starts_with(prefix)) {
        o.check(zero, name + " has a nonzero gradient without scene " + std::to_string(excluded) + " samples");
        ++zero_checks;
      } else if (name.starts_with("pose.")) {
        o.check(!zero, name + " should receive gradient");
      }
    }
  }

  std::size_t routed = 0;
  std::size_t non_trivial = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng bias(seed + 50);
    for (auto& b : params.at("classifier.bias").storage()) b = 2.0 * bias.normal();
    const auto preds = predict(params, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const ModelInput in{&samples[i].image, samples[i].caption_tokens};
      Rng rng(0);
      const auto out = forward(params, std::span(&in, 1), Mode::kEval, rng);
      const auto& p = out[0].probabilities.storage();
      const auto argmax = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      const geo::Pose expect = head_to_pose(out[0].heads[argmax]);
      o.check(out[0].selected == argmax && preds[i].scene == argmax, "selected head is the argmax");
      o.check(preds[i].pose.p == expect.p && preds[i].pose.q == expect.q, "pose comes from the argmax head");
      non_trivial += argmax != samples[i].scene_index;
      ++routed;
    }
  }
  o.check(non_trivial > 0, "some evaluations route away from the ground-truth scene");
  o.note(std::to_string(zero_checks) + " untouched head tensors exactly zero, " + std::to_string(routed) +
         " evaluations routed by argmax (" + std::to_string(non_trivial) + " differ from ground truth)");
  return o;
}

std::size_t closed_form_count(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  const std::size_t k = c.n_scenes;
  return c.channels * c.patch * c.patch * d + d + c.vocab * d + c.n_layers * (8 * d * d + 12 * d) + 8 * d * d +
         7 * d + d * k + k + k * (d * d + 8 * d + 7) + 2;
}

// 6. Decoder depth sweep.
Outcome ablation_knob() {
  Outcome o;
  const SceneCatalog catalog = SceneCatalog::seven_scenes().prefix(3);
  const auto samples = generate_synthetic(4, catalog, 2, SyntheticSpec{64, 64, 32});
  std::string counts;
  for (std::size_t n : kAllowedDecoderDepths) {
    const RunConfig rc = parse_run_config("", std::vector<std::string>{"model.height=64", "model.width=64", "model.patch=8",
                                               "model.n_layers=" + std::to_string(n), "data.scenes=3"});
    ModelConfig m = rc.model;
    TrainConfig t;
    t.batch_size = 6;
    t.epochs = 1;
    t.dropout = 0.0;
    t.color_jitter = false;
    const TrainResult r = train(m, t, samples, catalog);
    const MetricsReport rep = evaluate(r.params, samples, catalog);
    o.check(r.log.size() == 1 && std::isfinite(r.log[0].loss), "training with N=" + std::to_string(n));
    o.check(rep.scenes.size() == 3, "evaluation with N=" + std::to_string(n));
    m.dropout = t.dropout;
    const std::size_t closed = closed_form_count(m);
    o.check(r.params.parameter_count() == closed && expected_parameter_count(m) == closed,
            "parameter count for N=" + std::to_string(n));
    counts += (counts.empty() ? "" : ", ") + ("N=" + std::to_string(n) + ":" + std::to_string(closed));
  }
  bool rejected = false;
  try {
    parse_run_config("", std::vector<std::string>{"model.n_layers=3"});
  } catch (const ConfigError& e) {
    rejected = e.key() == "model.n_layers";
  }
  o.check(rejected, "N=3 rejected naming model.n_layers");
  o.note("parameters " + counts + "; N=3 rejected");
  return o;
}

// 7. Two identical training commands produce identical bytes.
Outcome determinism(const std::filesystem::path& work) {
  Outcome o;
  const auto root = work / "determinism";
  std::filesystem::remove_all(root);
  auto config_for = [&](const std::string& run) {
    return parse_run_config("", std::vector<std::string>{"model.height=32", "model.width=32", "model.patch=8", "model.d_model=32",
                                 "model.n_heads=4", "model.n_layers=2", "data.scenes=3", "data.samples_per_scene=4",
                                 "data.image_height=40", "data.image_width=40", "data.seed=21",
                                 "data.dataset=" + (root / "dataset").string(), "train.epochs=4", "train.batch_size=5",
                                 "train.lr0=1e-3", "train.dropout=0.5", "train.color_jitter=true", "train.eval_every=4",
                                 "train.seed=17", "paths.output=" + (root / run).string()});
  };
  std::ostringstream sink;
  cmd_gen_data(config_for("a"), sink);
  cmd_train(config_for("a"), sink);
  cmd_train(config_for("b"), sink);
  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(root / "a")) {
    const auto name = entry.path().filename();
    if (name == "config.json") continue;
    const auto other = root / "b" / name;
    o.check(std::filesystem::exists(other) && read_all(entry.path()) == read_all(other), name.string() + " identical");
    ++compared;
  }
  o.check(std::filesystem::exists(root / "a" / "loss.log") && std::filesystem::exists(root / "a" / "model.ckpt"),
          "loss log and checkpoint written");
  o.check(compared >= 3, "periodic checkpoints written");
  o.note(std::to_string(compared) + " output files bitwise identical");
  return o;
}

// 8. Pose ingestion.
Outcome ingestion() {
  Outcome o;
  const geo::Pose id = parse_7scenes_pose("1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
  o.check(id.q == geo::Quaternion::identity() && id.p == geo::Vec3{0.0, 0.0, 0.0}, "identity pose");

  Rng rng(8);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    geo::Pose pose;
    pose.p = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    pose.q = geo::canonicalize_hemisphere(geo::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal()).q);
    const geo::Pose back = parse_7scenes_pose(format_7scenes_pose(pose));
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(back.p[k] - pose.p[k]));
    worst = std::max({worst, std::abs(back.q.w - pose.q.w), std::abs(back.q.v[0] - pose.q.v[0]),
                      std::abs(back.q.v[1] - pose.q.v[1]), std::abs(back.q.v[2] - pose.q.v[2])});
  }
  o.check(worst < kIngestTol, "round trip error " + fmt("%.2e", worst));

  const auto entries = parse_cambridge_index(
      "Visual Landmark Dataset V1\n"
      "ImageFile, Camera Position [X Y Z W P Q R]\n"
      "\n"
      "seq1/frame00001.png 57.47 -20.54 1.69 0.69 0.01 0.72 -0.02\n"
      "seq1/frame00002.png 57.50 -20.60 1.70 -0.62 0.33 0.61 0.35\n");
  o.check(entries.size() == 2, std::to_string(entries.size()) + " Cambridge samples");
  for (const auto& e : entries) {
    const auto& q = e.pose.q;
    const double n = std::sqrt(q.w * q.w + q.v[0] * q.v[0] + q.v[1] * q.v[1] + q.v[2] * q.v[2]);
    o.check(q.w > 0.0 && geo::canonicalize_hemisphere(q) == q && std::abs(n - 1.0) < 1e-12,
            "canonical unit quaternion for " + e.image_path);
  }
  o.note("round trip " + fmt("%.1e", worst) + ", " + std::to_string(entries.size()) + " Cambridge samples");
  return o;
}

// 9. Learning rate schedule and optimizer.
Outcome schedule_optimizer() {
  Outcome o;
  const double lr0 = 4.5e-5;
  const std::uint64_t total = 1998;
  o.check(cosine_lr(0, total, lr0) == lr0, "lr(0) == lr0");
  o.check(cosine_lr(total, total, lr0) == 0.0, "lr(T) == 0");
  o.check(cosine_lr(total / 2, total, lr0) == lr0 / 2, "lr(T/2) == lr0/2");

  Rng rng(9);
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> grads;
  for (const char* name : {"a", "b"}) {
    Tensor w({8, 8});
    for (auto& v : w.storage()) v = rng.normal();
    params[name] = w;
    grads[name] = Tensor({8, 8});
  }
  const auto before = params;
  const double lr = 3e-3;
  const double wd = 4e-5;
  OptimizerState state;
  adamw_step(params, grads, state, lr, wd);
  double worst = 0.0;
  for (const auto& [name, w] : params)
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w[i] - before.at(name)[i] * (1.0 - lr * wd)));
  o.check(worst <= kDecayTol, "weight decay error " + fmt("%.2e", worst));
  o.note("endpoints exact, decay error " + fmt("%.1e", worst));
  return o;
}

// 10. Comparison against the stored published tables.
Outcome fixture_comparison(const std::filesystem::path& work) {
  Outcome o;
  std::filesystem::create_directories(work);
  struct Case {
    std::string fixture;
    SceneCatalog catalog;
    double pos;
    double rot;
  };
  const std::vector<Case> cases{{"7scenes", SceneCatalog::seven_scenes(), 0.16, 6.98},
                                {"cambridge", SceneCatalog::cambridge_landmarks(), 0.93, 2.90}};
  std::string summary;
  for (const auto& c : cases) {
    MetricsReport report;
    Rng rng(10);
    for (const auto& s : c.catalog.scenes()) {
      report.scenes.push_back({s.index, s.name, 20, rng.uniform(0.0, 2.0), rng.uniform(0.0, 20.0), 1.0});
    }
    report.average_position_m = 0.5;
    report.average_rotation_deg = 5.0;
    report.accuracy = 1.0;
    const auto path = work / ("synthetic_report_" + c.fixture + ".txt");
    std::ofstream(path) << format_report(report);
    std::ostringstream out;
    const Comparison cmp = cmd_compare(path, c.fixture, "MVL-Loc", out);
    o.check(cmp.average.published.position_m == c.pos && cmp.average.published.rotation_deg == c.rot,
            c.fixture + " published average");
    o.check(cmp.average.delta.position_m == 0.5 - c.pos && cmp.average.delta.rotation_deg == 5.0 - c.rot,
            c.fixture + " average delta");
    o.check(cmp.rows.size() == c.catalog.size(), c.fixture + " row count");
    for (const auto& row : cmp.rows) {
      o.check(row.delta.position_m == row.measured.position_m - row.published.position_m &&
                  row.delta.rotation_deg == row.measured.rotation_deg - row.published.rotation_deg,
              c.fixture + " delta for " + row.scene);
    }
    o.check(out.str().find("not reproduced") != std::string::npos, c.fixture + " labels published values");
    summary += (summary.empty() ? "" : ", ") + c.fixture + " (" + fmt("%.2f", cmp.average.published.position_m) +
               " m, " + fmt("%.2f", cmp.average.published.rotation_deg) + " deg)";
  }
  o.note(summary);
  return o;
}

}  // namespace
}  // namespace mvl

int main(int argc, char** argv) {
  using namespace mvl;
  const std::filesystem::path work = argc > 1 ? argv[1] : std::filesystem::temp_directory_path() / "mvlloc_acceptance";
  std::filesystem::create_directories(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"quaternion suite", quaternion_suite},
      {"loss algebra", loss_algebra},
      {"overfit run", overfit_run},
      {"routing invariants", routing_invariants},
      {"decoder depth sweep", ablation_knob},
      {"determinism", [&] { return determinism(work); }},
      {"pose ingestion", ingestion},
      {"schedule and optimizer", schedule_optimizer},
      {"fixture comparison", [&] { return fixture_comparison(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("criterion %zu %-24s %s  %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
