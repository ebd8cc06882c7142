#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wavectl::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 720;
  int height = 420;
};

/// Minimal SVG line chart. Non-finite points (and non-positive ones on a log
/// axis) are skipped.
std::string line_chart(const ChartSpec& spec, const std::vector<Series>& series);
void save_line_chart(const std::filesystem::path& path, const ChartSpec& spec, const std::vector<Series>& series);

}  // namespace wavectl::plot
