#include "mvlloc/pose_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace mvl {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_number(std::string_view token) {
  // Cambridge files sometimes separate with commas.
  if (!token.empty() && token.back() == ',') token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

geo::Pose parse_7scenes_pose(std::string_view text) {
  const auto tokens = split_whitespace(text);
  if (tokens.size() != 16) {
    throw std::invalid_argument("7-Scenes pose needs 16 numbers, found " + std::to_string(tokens.size()));
  }
  double m[16];
  for (std::size_t i = 0; i < 16; ++i) {
    const auto v = parse_number(tokens[i]);
    if (!v) throw std::invalid_argument("7-Scenes pose: '" + std::string(tokens[i]) + "' is not a number");
    m[i] = *v;
  }
  const double bottom[4] = {0.0, 0.0, 0.0, 1.0};
  for (int c = 0; c < 4; ++c) {
    if (std::abs(m[12 + c] - bottom[c]) > 1e-6) {
      throw std::invalid_argument("7-Scenes pose: bottom row is not (0, 0, 0, 1)");
    }
  }
  geo::Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = m[i * 4 + j];
  geo::Pose pose;
  pose.p = {m[3], m[7], m[11]};
  pose.q = geo::rotation_matrix_to_quat(r);
  return pose;
}

std::string format_7scenes_pose(const geo::Pose& pose) {
  const geo::Mat3 r = geo::quat_to_matrix(pose.q);
  std::ostringstream os;
  for (int i = 0; i < 3; ++i) {
    os << format_double(r[i][0]) << ' ' << format_double(r[i][1]) << ' ' << format_double(r[i][2]) << ' '
       << format_double(pose.p[static_cast<std::size_t>(i)]) << '\n';
  }
  os << "0 0 0 1\n";
  return os.str();
}

std::vector<CambridgeEntry> parse_cambridge_index(std::string_view text, CambridgeConvention convention) {
  std::vector<CambridgeEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    const auto fields = split_whitespace(line);
    if (fields.size() < 2) continue;
    std::vector<double> numbers;
    bool numeric = true;
    for (std::size_t i = 1; i < fields.size() && numeric; ++i) {
      const auto v = parse_number(fields[i]);
      if (v) {
        numbers.push_back(*v);
      } else {
        numeric = false;
      }
    }
    if (!numeric) continue;
    if (numbers.size() != 7) {
      throw std::invalid_argument("Cambridge index line " + std::to_string(line_no) + ": expected 7 numbers after " +
                                  "the image path, found " + std::to_string(numbers.size()));
    }
    const auto [unit, degenerate] = geo::normalize(numbers[3], numbers[4], numbers[5], numbers[6]);
    if (degenerate) {
      throw std::invalid_argument("Cambridge index line " + std::to_string(line_no) + ": zero quaternion");
    }
    const geo::Quaternion q = convention == CambridgeConvention::kWorldToCamera ? geo::conjugate(unit) : unit;
    CambridgeEntry entry;
    entry.image_path = std::string(fields[0]);
    entry.pose.p = {numbers[0], numbers[1], numbers[2]};
    entry.pose.q = geo::canonicalize_hemisphere(q);
    entries.push_back(std::move(entry));
    if (end == text.size()) break;
  }
  return entries;
}

}  // namespace mvl
