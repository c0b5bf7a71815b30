#include "mvlloc/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mvl {

namespace {

constexpr std::string_view kHeader = "mvlloc-report\t1";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::runtime_error("report line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view s, std::size_t line_no) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("report line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  os << kHeader << '\n';
  for (const auto& s : report.scenes) {
    if (s.name.find_first_of("\t\n") != std::string::npos) {
      throw std::invalid_argument("scene name '" + s.name + "' contains a tab or newline");
    }
    os << "scene\t" << s.index << '\t' << s.name << '\t' << s.samples << '\t' << num(s.median_position_m) << '\t'
       << num(s.median_rotation_deg) << '\t' << num(s.accuracy) << '\n';
  }
  os << "average\t" << num(report.average_position_m) << '\t' << num(report.average_rotation_deg) << '\t'
     << num(report.accuracy) << '\n';
  return os.str();
}

MetricsReport parse_report(std::string_view text) {
  MetricsReport report;
  std::size_t line_no = 0;
  bool seen_header = false;
  bool seen_average = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != kHeader) throw std::runtime_error("report line 1: expected header '" + std::string(kHeader) + "'");
      seen_header = true;
      continue;
    }
    if (seen_average) throw std::runtime_error("report line " + std::to_string(line_no) + ": data after average");
    const auto f = split_tabs(line);
    if (f[0] == "scene") {
      if (f.size() != 7) throw std::runtime_error("report line " + std::to_string(line_no) + ": expected 7 fields");
      SceneMetrics s;
      s.index = parse_size(f[1], line_no);
      s.name = std::string(f[2]);
      s.samples = parse_size(f[3], line_no);
      s.median_position_m = parse_double(f[4], line_no);
      s.median_rotation_deg = parse_double(f[5], line_no);
      s.accuracy = parse_double(f[6], line_no);
      report.scenes.push_back(std::move(s));
    } else if (f[0] == "average") {
      if (f.size() != 4) throw std::runtime_error("report line " + std::to_string(line_no) + ": expected 4 fields");
      report.average_position_m = parse_double(f[1], line_no);
      report.average_rotation_deg = parse_double(f[2], line_no);
      report.accuracy = parse_double(f[3], line_no);
      seen_average = true;
    } else {
      throw std::runtime_error("report line " + std::to_string(line_no) + ": unknown record '" + std::string(f[0]) +
                               "'");
    }
  }
  if (!seen_header) throw std::runtime_error("empty report");
  if (!seen_average) throw std::runtime_error("report has no average line");
  return report;
}

std::string format_report_table(const MetricsReport& report) {
  std::size_t width = 7;
  for (const auto& s : report.scenes) width = std::max(width, s.name.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %12s  %12s  %8s\n", static_cast<int>(width), "scene", "samples",
                "position_m", "rotation_deg", "accuracy");
  os << buf;
  for (const auto& s : report.scenes) {
    std::snprintf(buf, sizeof buf, "%-*s  %7zu  %12.4f  %12.3f  %8.3f\n", static_cast<int>(width), s.name.c_str(),
                  s.samples, s.median_position_m, s.median_rotation_deg, s.accuracy);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %12.4f  %12.3f  %8.3f\n", static_cast<int>(width), "average", "",
                report.average_position_m, report.average_rotation_deg, report.accuracy);
  os << buf;
  return os.str();
}

}  // namespace mvl
