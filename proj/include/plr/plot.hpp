#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace plr {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal SVG line chart. Empty series draw only the axes; single points
/// draw a marker.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, bool stacked = false);

struct PlotFiles {
  std::string test_return_svg;
  std::string tier_mass_svg;
  std::string curriculum_csv;  // update,tier,mass
};

/// Renders the test-return curve and the stacked per-tier replay mass from a
/// metrics log. Throws ContractViolation on records missing required fields.
PlotFiles emit_plots(const std::vector<nlohmann::json>& records);

void write_plot_files(const PlotFiles& files, const std::filesystem::path& dir);

}  // namespace plr
