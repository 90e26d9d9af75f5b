#include "obsimpact/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

namespace obsimpact {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 60;
constexpr int kMarginBottom = 70;
constexpr int kMarginTop = 30;
constexpr int kMarginRight = 20;

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                          "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6"};

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  return out;
}

void axes(std::ofstream& out, const std::string& title) {
  out << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
      << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
      << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
      << "\" stroke=\"black\"/>\n";
}

}  // namespace

void write_impact_bar_svg(const std::string& path, const ImpactReport& report) {
  double max_v = 0.0;
  for (const auto& [kind, v] : report.kind_impact) max_v = std::max(max_v, v);
  if (max_v <= 0.0) max_v = 1.0;

  std::ofstream out = open_svg(path);
  axes(out, "Mean impact by observation type (" + method_name(report.method) + ")");

  const int plot_w = kWidth - kMarginLeft - kMarginRight;
  const int plot_h = kHeight - kMarginTop - kMarginBottom;
  const int n = static_cast<int>(report.kind_impact.size());
  const double slot = static_cast<double>(plot_w) / std::max(1, n);
  int i = 0;
  for (const auto& [kind, v] : report.kind_impact) {
    const double h = plot_h * (v / max_v);
    const double x = kMarginLeft + i * slot + slot * 0.15;
    const double y = kHeight - kMarginBottom - h;
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << slot * 0.7 << "\" height=\""
        << h << "\" fill=\"" << kPalette[i % 11] << "\"/>\n";
    out << "<text x=\"" << kMarginLeft + (i + 0.5) * slot << "\" y=\""
        << kHeight - kMarginBottom + 14 << "\" text-anchor=\"end\" transform=\"rotate(-45 "
        << kMarginLeft + (i + 0.5) * slot << ' ' << kHeight - kMarginBottom + 14 << ")\">"
        << kind_name(kind) << "</text>\n";
    ++i;
  }
  out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << kMarginTop + 8
      << "\" text-anchor=\"end\">" << format_csv_double(max_v) << "</text>\n";
  out << "</svg>\n";
}

void write_impact_series_svg(const std::string& path, const ImpactReport& report) {
  std::set<int> times;
  std::map<NodeKind, std::map<int, double>> series;
  double max_v = 0.0;
  for (const auto& [key, v] : report.time_kind_impact) {
    times.insert(key.first);
    series[key.second][key.first] = v;
    max_v = std::max(max_v, v);
  }
  if (max_v <= 0.0) max_v = 1.0;

  std::ofstream out = open_svg(path);
  axes(out, "Impact by observation type over time (" + method_name(report.method) + ")");

  const int plot_w = kWidth - kMarginLeft - kMarginRight - 80;  // room for the legend
  const int plot_h = kHeight - kMarginTop - kMarginBottom;
  const std::vector<int> ts(times.begin(), times.end());
  auto x_of = [&](int t) {
    if (ts.size() < 2) return kMarginLeft + plot_w / 2.0;
    const double frac = static_cast<double>(t - ts.front()) / (ts.back() - ts.front());
    return kMarginLeft + frac * plot_w;
  };
  auto y_of = [&](double v) { return kHeight - kMarginBottom - plot_h * (v / max_v); };

  int ci = 0;
  for (const auto& [kind, points] : series) {
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[ci % 11] << "\" points=\"";
    for (int t : ts) {
      const auto it = points.find(t);
      const double v = it == points.end() ? 0.0 : it->second;
      out << x_of(t) << ',' << y_of(v) << ' ';
    }
    out << "\"/>\n";
    const int ly = kMarginTop + 14 * ci;
    out << "<rect x=\"" << kWidth - 90 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[ci % 11] << "\"/>\n";
    out << "<text x=\"" << kWidth - 76 << "\" y=\"" << ly + 9 << "\">" << kind_name(kind)
        << "</text>\n";
    ++ci;
  }
  out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << kMarginTop + 8
      << "\" text-anchor=\"end\">" << format_csv_double(max_v) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace obsimpact
