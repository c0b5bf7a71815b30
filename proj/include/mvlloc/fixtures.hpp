#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvlloc/report.hpp"

namespace mvl {

struct ErrorPair {
  double position_m = 0.0;
  double rotation_deg = 0.0;
};

struct FixtureMethod {
  std::string name;
  std::vector<ErrorPair> scenes;  // parallel to FixtureTable::scenes
  ErrorPair average;              // as printed, not recomputed
};

/// Published per-scene median errors for one benchmark. Read-only reference
/// values; nothing in this library reproduces them.
struct FixtureTable {
  std::string dataset;
  std::string source;
  std::vector<std::string> scenes;
  std::vector<FixtureMethod> methods;

  const FixtureMethod& method(std::string_view name) const;
  /// Index of `scene` in `scenes`; case-insensitive, "Red Kitchen" and
  /// "Shop Facade" are accepted spellings.
  std::optional<std::size_t> find_scene(std::string_view scene) const;

  static const FixtureTable& seven_scenes();
  static const FixtureTable& cambridge_landmarks();
  /// "7scenes" or "cambridge"; throws std::invalid_argument otherwise.
  static const FixtureTable& by_name(std::string_view name);
};

struct ComparisonRow {
  std::string scene;
  ErrorPair measured;
  ErrorPair published;
  ErrorPair delta;  // measured - published
};

struct Comparison {
  std::string dataset;
  std::string source;
  std::string method;
  std::vector<ComparisonRow> rows;  // in fixture order
  ComparisonRow average;
};

/// Pairs each report scene with the fixture row of the same name. Throws
/// std::invalid_argument when the scene sets differ.
Comparison compare_report(const MetricsReport& report, const FixtureTable& fixture, std::string_view method);

/// Side-by-side table with meters and degrees in separate labelled columns.
std::string format_comparison(const Comparison& comparison);

}  // namespace mvl
