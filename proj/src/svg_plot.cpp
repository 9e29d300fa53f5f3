#include "arcade/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "arcade/errors.hpp"

namespace arcade::harness {

namespace {
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  const double W = 640, H = 420;
  const double ml = 64, mr = 150, mt = 40, mb = 48;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) { xmax += 1; xmin -= 1; }
  if (ymax == ymin) { ymax += 1; ymin -= 1; }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "' font-family='sans-serif' font-size='12'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
     << title << "</text>\n";

  // axes + ticks
  os << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='"
     << ph << "' fill='none' stroke='#333'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    os << "<line x1='" << px(fx) << "' y1='" << mt + ph << "' x2='" << px(fx)
       << "' y2='" << mt + ph + 4 << "' stroke='#333'/>\n";
    os << "<text x='" << px(fx) << "' y='" << mt + ph + 18
       << "' text-anchor='middle'>" << std::round(fx * 1000) / 1000 << "</text>\n";
    os << "<line x1='" << ml - 4 << "' y1='" << py(fy) << "' x2='" << ml
       << "' y2='" << py(fy) << "' stroke='#333'/>\n";
    os << "<text x='" << ml - 8 << "' y='" << py(fy) + 4
       << "' text-anchor='end'>" << std::round(fy * 1000) / 1000 << "</text>\n";
  }
  os << "<text x='" << ml + pw / 2 << "' y='" << H - 10
     << "' text-anchor='middle'>" << x_label << "</text>\n";
  os << "<text x='16' y='" << mt + ph / 2
     << "' text-anchor='middle' transform='rotate(-90 16 " << mt + ph / 2
     << ")'>" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    os << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
         << "' r='2.5' fill='" << color << "'/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(si);
    os << "<line x1='" << ml + pw + 8 << "' y1='" << ly << "' x2='"
       << ml + pw + 28 << "' y2='" << ly << "' stroke='" << color
       << "' stroke-width='2'/>\n";
    os << "<text x='" << ml + pw + 32 << "' y='" << ly + 4 << "'>" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << os.str();
}

}  // namespace arcade::harness
