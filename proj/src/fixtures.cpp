#include "mvlloc/fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mvl {

namespace {

std::string fold(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

FixtureMethod row(std::string name, std::vector<ErrorPair> scenes, ErrorPair average) {
  return {std::move(name), std::move(scenes), average};
}

FixtureTable make_seven_scenes() {
  FixtureTable t;
  t.dataset = "7Scenes";
  t.source = "published 7 Scenes results table (reference values, not reproduced here)";
  t.scenes = {"Chess", "Fire", "Heads", "Office", "Pumpkin", "Kitchen", "Stairs"};
  t.methods = {
      row("PoseNet", {{0.32, 7.60}, {0.48, 14.6}, {0.31, 12.2}, {0.48, 7.68}, {0.47, 8.42}, {0.59, 8.64}, {0.47, 13.81}},
          {0.45, 10.42}),
      row("Bayesian", {{0.38, 7.24}, {0.43, 13.8}, {0.30, 12.3}, {0.49, 8.09}, {0.63, 7.18}, {0.59, 7.59}, {0.48, 13.22}},
          {0.47, 9.91}),
      row("PN-Lstm", {{0.24, 5.79}, {0.34, 12.0}, {0.22, 13.8}, {0.31, 8.11}, {0.34, 7.03}, {0.37, 8.83}, {0.41, 13.21}},
          {0.32, 9.82}),
      row("PoseNet17", {{0.14, 4.53}, {0.29, 11.5}, {0.19, 13.1}, {0.20, 5.62}, {0.27, 4.77}, {0.24, 5.37}, {0.36, 12.53}},
          {0.24, 8.20}),
      row("IRPNet", {{0.13, 5.78}, {0.27, 9.83}, {0.17, 13.2}, {0.25, 6.41}, {0.23, 5.83}, {0.31, 7.32}, {0.35, 11.91}},
          {0.24, 8.61}),
      row("Hourglass",
          {{0.15, 6.18}, {0.27, 10.83}, {0.20, 11.6}, {0.26, 8.59}, {0.26, 7.32}, {0.29, 10.7}, {0.30, 12.75}},
          {0.25, 9.71}),
      row("AtLoc", {{0.11, 4.37}, {0.27, 11.7}, {0.16, 11.9}, {0.19, 5.61}, {0.22, 4.54}, {0.25, 5.62}, {0.28, 10.9}},
          {0.21, 7.81}),
      row("MSPN", {{0.10, 4.76}, {0.29, 11.5}, {0.17, 13.2}, {0.17, 6.87}, {0.21, 5.53}, {0.23, 6.81}, {0.31, 11.81}},
          {0.21, 8.64}),
      row("MS-Trans", {{0.11, 4.67}, {0.26, 9.78}, {0.16, 12.8}, {0.17, 5.66}, {0.18, 4.44}, {0.21, 5.99}, {0.29, 8.45}},
          {0.20, 7.40}),
      row("c2f-MsTrans",
          {{0.10, 4.63}, {0.25, 9.89}, {0.14, 12.5}, {0.16, 5.65}, {0.16, 4.42}, {0.18, 6.29}, {0.27, 7.86}},
          {0.18, 7.32}),
      row("MVL-Loc", {{0.09, 3.95}, {0.22, 9.45}, {0.11, 11.9}, {0.14, 5.68}, {0.16, 3.82}, {0.14, 6.11}, {0.23, 8.11}},
          {0.16, 6.98}),
  };
  return t;
}

FixtureTable make_cambridge() {
  FixtureTable t;
  t.dataset = "Cambridge Landmarks";
  t.source = "published Cambridge Landmarks results table (reference values, not reproduced here)";
  t.scenes = {"King's College", "Old Hospital", "Shop Façade", "St Mary's Church"};
  t.methods = {
      row("PoseNet", {{1.94, 5.43}, {0.61, 2.92}, {1.16, 3.92}, {2.67, 8.52}}, {1.60, 5.20}),
      row("BayesianPoseNet", {{1.76, 4.08}, {2.59, 5.18}, {1.27, 7.58}, {2.13, 8.42}}, {1.94, 6.32}),
      row("MapNet", {{1.08, 1.91}, {1.96, 3.95}, {1.51, 4.26}, {2.02, 4.57}}, {1.64, 3.67}),
      row("PoseNet17", {{1.62, 2.31}, {2.64, 3.93}, {1.16, 5.77}, {2.95, 6.50}}, {2.09, 4.63}),
      row("IRPNet", {{1.21, 2.19}, {1.89, 3.42}, {0.74, 3.51}, {1.89, 4.98}}, {1.43, 3.53}),
      row("PoseNet-Lstm", {{0.99, 3.74}, {1.53, 4.33}, {1.20, 7.48}, {1.54, 6.72}}, {1.32, 5.57}),
      row("MSPN", {{1.77, 3.76}, {2.55, 4.05}, {2.92, 7.49}, {2.67, 6.18}}, {2.48, 5.37}),
      row("MS-Trans", {{0.85, 1.63}, {1.83, 2.43}, {0.88, 3.11}, {1.64, 4.03}}, {1.30, 2.80}),
      row("c2f-MsTrans", {{0.71, 2.71}, {1.50, 2.98}, {0.61, 2.92}, {1.16, 3.92}}, {0.99, 3.13}),
      row("MVL-Loc", {{0.62, 1.89}, {1.38, 2.41}, {0.63, 3.22}, {1.09, 4.09}}, {0.93, 2.90}),
  };
  return t;
}

ErrorPair minus(const ErrorPair& a, const ErrorPair& b) {
  return {a.position_m - b.position_m, a.rotation_deg - b.rotation_deg};
}

}  // namespace

const FixtureMethod& FixtureTable::method(std::string_view name) const {
  for (const auto& m : methods)
    if (fold(m.name) == fold(name)) return m;
  std::string known;
  for (const auto& m : methods) known += (known.empty() ? "" : ", ") + m.name;
  throw std::invalid_argument("no method '" + std::string(name) + "' in the " + dataset + " fixture (have " + known +
                              ")");
}

std::optional<std::size_t> FixtureTable::find_scene(std::string_view scene) const {
  std::string key = fold(scene);
  if (key == "red kitchen") key = "kitchen";
  if (key == "shop facade") key = fold("Shop Façade");
  for (std::size_t i = 0; i < scenes.size(); ++i)
    if (fold(scenes[i]) == key) return i;
  return std::nullopt;
}

const FixtureTable& FixtureTable::seven_scenes() {
  static const FixtureTable table = make_seven_scenes();
  return table;
}

const FixtureTable& FixtureTable::cambridge_landmarks() {
  static const FixtureTable table = make_cambridge();
  return table;
}

const FixtureTable& FixtureTable::by_name(std::string_view name) {
  const std::string key = fold(name);
  if (key == "7scenes") return seven_scenes();
  if (key == "cambridge") return cambridge_landmarks();
  throw std::invalid_argument("unknown fixture '" + std::string(name) + "' (expected 7scenes or cambridge)");
}

Comparison compare_report(const MetricsReport& report, const FixtureTable& fixture, std::string_view method) {
  const FixtureMethod& m = fixture.method(method);
  std::vector<const SceneMetrics*> matched(fixture.scenes.size(), nullptr);
  for (const auto& s : report.scenes) {
    const auto idx = fixture.find_scene(s.name);
    if (!idx) throw std::invalid_argument("report scene '" + s.name + "' is not in the " + fixture.dataset + " fixture");
    if (matched[*idx]) throw std::invalid_argument("report lists scene '" + s.name + "' twice");
    matched[*idx] = &s;
  }
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (!matched[i]) {
      throw std::invalid_argument("report has no scene '" + fixture.scenes[i] + "' required by the " +
                                  fixture.dataset + " fixture");
    }
  }
  Comparison c;
  c.dataset = fixture.dataset;
  c.source = fixture.source;
  c.method = m.name;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    ComparisonRow r;
    r.scene = fixture.scenes[i];
    r.measured = {matched[i]->median_position_m, matched[i]->median_rotation_deg};
    r.published = m.scenes[i];
    r.delta = minus(r.measured, r.published);
    c.rows.push_back(std::move(r));
  }
  c.average.scene = "Average";
  c.average.measured = {report.average_position_m, report.average_rotation_deg};
  c.average.published = m.average;
  c.average.delta = minus(c.average.measured, c.average.published);
  return c;
}

std::string format_comparison(const Comparison& c) {
  std::size_t width = 7;
  for (const auto& r : c.rows) width = std::max(width, r.scene.size());
  std::ostringstream os;
  os << c.dataset << ": measured vs " << c.method << "\n";
  os << "Published values: " << c.source << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %12s  %14s  %14s  %14s\n", static_cast<int>(width), "scene",
                "meas_pos_m", "pub_pos_m", "delta_pos_m", "meas_rot_deg", "pub_rot_deg", "delta_rot_deg");
  os << buf;
  auto line = [&](const ComparisonRow& r) {
    std::snprintf(buf, sizeof buf, "%-*s  %12.4f  %12.4f  %+12.4f  %14.3f  %14.3f  %+14.3f\n", static_cast<int>(width),
                  r.scene.c_str(), r.measured.position_m, r.published.position_m, r.delta.position_m,
                  r.measured.rotation_deg, r.published.rotation_deg, r.delta.rotation_deg);
    os << buf;
  };
  for (const auto& r : c.rows) line(r);
  line(c.average);
  return os.str();
}

}  // namespace mvl
