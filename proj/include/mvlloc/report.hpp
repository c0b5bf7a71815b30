#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mvl {

struct SceneMetrics {
  std::size_t index = 0;
  std::string name;
  std::size_t samples = 0;
  double median_position_m = 0.0;
  double median_rotation_deg = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const SceneMetrics&, const SceneMetrics&) = default;
};

/// Averages are arithmetic means of the per-scene medians; `accuracy` is the
/// fraction of all samples whose predicted scene is correct.
struct MetricsReport {
  std::vector<SceneMetrics> scenes;
  double average_position_m = 0.0;
  double average_rotation_deg = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Tab-separated text:
///   mvlloc-report<TAB>1
///   scene<TAB>index<TAB>name<TAB>samples<TAB>position_m<TAB>rotation_deg<TAB>accuracy
///   ...
///   average<TAB>position_m<TAB>rotation_deg<TAB>accuracy
/// Numbers use %.17g so parsing restores them exactly.
std::string format_report(const MetricsReport& report);
/// Throws std::runtime_error naming the offending line.
MetricsReport parse_report(std::string_view text);

/// Aligned human-readable table.
std::string format_report_table(const MetricsReport& report);

}  // namespace mvl
