#include "plr/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "plr/error.hpp"

namespace plr {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 60;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

const nlohmann::json& field(const nlohmann::json& record, const char* key) {
  require(record.is_object() && record.contains(key), "malformed metrics record");
  return record.at(key);
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series_in, bool stacked) {
  std::vector<Series> series = series_in;
  if (stacked) {
    for (size_t s = 1; s < series.size(); ++s) {
      require(series[s].y.size() == series[s - 1].y.size(), "stacked series must share their x values");
      for (size_t i = 0; i < series[s].y.size(); ++i) series[s].y[i] += series[s - 1].y[i];
    }
  }
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = stacked ? 0.0 : x_min;
  double y_max = -std::numeric_limits<double>::infinity();
  for (const Series& s : series) {
    require(s.x.size() == s.y.size(), "series x and y lengths differ");
    for (double x : s.x) x_min = std::min(x_min, x), x_max = std::max(x_max, x);
    for (double y : s.y) y_min = std::min(y_min, y), y_max = std::max(y_max, y);
  }
  const bool empty = !(x_min <= x_max);
  if (empty) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (x_max == x_min) x_min -= 0.5, x_max += 0.5;
  if (y_max == y_min) y_min -= 0.5, y_max += 0.5;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(kLeft + plot_w)
      << "\" y2=\"" << num(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kTop + plot_h) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x_min + (x_max - x_min) * k / 4.0;
    const double fy = y_min + (y_max - y_min) * k / 4.0;
    out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + plot_h + 16)
        << "\" text-anchor=\"middle\">" << label(fx) << "</text>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
        << label(fy) << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 10)
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text x=\"14\" y=\"" << num(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num(kTop + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const Series& ser = series[s];
    const char* color = kColors[s % std::size(kColors)];
    if (ser.x.size() == 1) {
      out << "<circle cx=\"" << num(px(ser.x[0])) << "\" cy=\"" << num(py(ser.y[0])) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    } else if (ser.x.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < ser.x.size(); ++i) {
        out << (i ? " " : "") << num(px(ser.x[i])) << ',' << num(py(ser.y[i]));
      }
      out << "\"/>\n";
    }
    out << "<text x=\"" << num(kLeft + 10) << "\" y=\"" << num(kTop + 14 + 14 * static_cast<double>(s))
        << "\" fill=\"" << color << "\">" << escape(ser.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

PlotFiles emit_plots(const std::vector<nlohmann::json>& records) {
  Series test{"test return", {}, {}};
  std::vector<Series> tiers;
  std::ostringstream csv;
  csv << "update,tier,mass\n";
  for (const auto& rec : records) {
    const std::string type = field(rec, "type").get<std::string>();
    if (type == "eval" || type == "final") {
      test.x.push_back(field(rec, "step").get<double>());
      test.y.push_back(field(rec, "test_return_mean").get<double>());
    }
    if (type == "update") {
      const auto update = field(rec, "update").get<int64_t>();
      const auto mass = field(rec, "tier_mass").get<std::vector<double>>();
      if (tiers.empty()) {
        for (size_t k = 0; k < mass.size(); ++k) tiers.push_back({"tier " + std::to_string(k + 1), {}, {}});
      }
      require(mass.size() == tiers.size(), "tier count changed within a log");
      for (size_t k = 0; k < mass.size(); ++k) {
        tiers[k].x.push_back(static_cast<double>(update));
        tiers[k].y.push_back(mass[k]);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%lld,%zu,%.17g\n", static_cast<long long>(update), k + 1, mass[k]);
        csv << buf;
      }
    }
  }
  PlotFiles files;
  files.test_return_svg = line_chart_svg("Test return", "step", "mean return", {test});
  files.tier_mass_svg = line_chart_svg("Replay mass per difficulty tier", "update", "cumulative mass", tiers, true);
  files.curriculum_csv = csv.str();
  return files;
}

void write_plot_files(const PlotFiles& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "test_return.svg") << files.test_return_svg;
  std::ofstream(dir / "tier_mass.svg") << files.tier_mass_svg;
  std::ofstream(dir / "curriculum.csv") << files.curriculum_csv;
}

}  // namespace plr
