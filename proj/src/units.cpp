// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/units.hpp"

#include <charconv>
#include <cmath>
#include <utility>
#include <vector>

#include "voxpipe/errors.hpp"

namespace voxpipe {

double parse_bytes(const std::string& text) {
  static const std::vector<std::pair<std::string, double>> suffixes = {
      {"Tbit", 1e12 / 8}, {"Gbit", 1e9 / 8}, {"Mbit", 1e6 / 8}, {"Kbit", 1e3 / 8},
      {"bit", 1.0 / 8},   {"TiB", 1099511627776.0}, {"GiB", 1073741824.0},
      {"MiB", 1048576.0}, {"KiB", 1024.0}, {"TB", 1e12}, {"GB", 1e9},
      {"MB", 1e6},        {"KB", 1e3},     {"kB", 1e3},  {"B", 1.0}};
  std::string s = text;
  while (!s.empty() && s.back() == ' ') s.pop_back();
  double scale = 1.0;
  for (const auto& [suffix, factor] : suffixes) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      s.resize(s.size() - suffix.size());
      scale = factor;
      break;
    }
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value) ||
      value < 0) {
    throw InputError("cannot parse size '" + text + "'");
  }
  return value * scale;
}

double parse_bandwidth(const std::string& text) {
  std::string s = text;
  if (s.size() > 2 && s.compare(s.size() - 2, 2, "/s") == 0) s.resize(s.size() - 2);
  const double bw = parse_bytes(s);
  if (!(bw > 0)) throw InputError("bandwidth must be positive, got '" + text + "'");
  return bw;
}

}  // namespace voxpipe
