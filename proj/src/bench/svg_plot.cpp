#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "quadtask/bench/bench.hpp"
#include "quadtask/error.hpp"

namespace quadtask {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Worker counts are spread on a log2 axis.
double xpos(double x, double lo, double hi) {
  const double w = kWidth - kLeft - kRight;
  if (hi <= lo) return kLeft + w / 2;
  return kLeft + w * (std::log2(x) - std::log2(lo)) / (std::log2(hi) - std::log2(lo));
}

double ypos(double y, double top) {
  const double h = kHeight - kTop - kBottom;
  return kHeight - kBottom - h * (top > 0 ? y / top : 0.0);
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& cls, const char* color,
                     bool dashed) {
  std::ostringstream s;
  s << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
    << (dashed ? "1" : "2") << '"';
  if (dashed) s << " stroke-dasharray=\"6 4\"";
  s << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s << (i ? " " : "") << fmt(pts[i].first) << ',' << fmt(pts[i].second);
  s << "\"/>\n";
  return s.str();
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series) {
  double xlo = INFINITY, xhi = 0, ytop = 0;
  std::set<double> xs;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      xlo = std::min(xlo, p.x);
      xhi = std::max(xhi, p.x);
      ytop = std::max(ytop, p.y.max);
      xs.insert(p.x);
    }
  if (xs.empty()) xlo = xhi = 1;
  ytop = ytop > 0 ? ytop * 1.1 : 1.0;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";

  // Axes, ticks and grid.
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  o << "<g class=\"axes\" stroke=\"black\">\n";
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n";
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n";
  o << "</g>\n<g class=\"ticks\">\n";
  for (double x : xs) {
    const double px = xpos(x, xlo, xhi);
    o << "<line x1=\"" << fmt(px) << "\" y1=\"" << y0 << "\" x2=\"" << fmt(px) << "\" y2=\"" << y0 + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fmt(px) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double v = ytop * i / 5.0, py = ypos(v, ytop);
    o << "<line x1=\"" << x0 << "\" y1=\"" << fmt(py) << "\" x2=\"" << x1 << "\" y2=\"" << fmt(py)
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << x0 - 6 << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">workers</text>\n";
  o << "<text transform=\"translate(18 " << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % std::size(kColors)];
    std::vector<std::pair<double, double>> mean, lo, hi;
    for (const auto& p : s.points) {
      const double px = xpos(p.x, xlo, xhi);
      mean.emplace_back(px, ypos(p.y.mean, ytop));
      lo.emplace_back(px, ypos(p.y.min, ytop));
      hi.emplace_back(px, ypos(p.y.max, ytop));
    }
    o << "<g class=\"series\" data-name=\"" << escape(s.name) << "\">\n";
    o << polyline(mean, "mean", color, false) << polyline(lo, "min", color, true) << polyline(hi, "max", color, true);
    for (const auto& [px, py] : mean) {
      o << "<circle class=\"point\" cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"3.5\" fill=\"" << color
        << "\"/>\n";
    }
    const double ly = kTop + 10 + 20 * static_cast<double>(si);
    o << "<line x1=\"" << x1 + 15 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 40 << "\" y2=\"" << ly << "\" stroke=\""
      << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << x1 + 46 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

PlotFiles write_plots(const std::filesystem::path& dir, const std::vector<BenchRecord>& records) {
  if (records.empty()) throw InvalidArgument("no records to plot");
  std::set<std::string> modes;
  for (const auto& r : records) modes.insert(r.mode);
  const bool tag_mode = modes.size() > 1;

  // series name -> worker count -> per-repeat values
  using Samples = std::map<std::string, std::map<std::size_t, std::vector<double>>>;
  Samples wall, eff, bytes;
  for (const auto& r : records) {
    const std::string name = tag_mode ? r.case_id + " (" + r.mode + ")" : r.case_id;
    wall[name][r.n_workers].push_back(r.wall_seconds);
    eff[name][r.n_workers].push_back(r.efficiency);
    bytes[name][r.n_workers].push_back(r.bytes_received.mean);
  }
  auto to_series = [](const Samples& s) {
    std::vector<PlotSeries> out;
    for (const auto& [name, by_workers] : s) {
      PlotSeries ps{name, {}};
      for (const auto& [w, v] : by_workers) ps.points.push_back({static_cast<double>(w), spread_of(v)});
      out.push_back(std::move(ps));
    }
    return out;
  };
  std::filesystem::create_directories(dir);
  PlotFiles files{dir / "wall_time.svg", dir / "efficiency.svg", dir / "bytes_received.svg"};
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    if (!out) throw Error("failed writing " + p.string());
  };
  write(files.wall_time, render_svg("Wall time", "seconds", to_series(wall)));
  write(files.efficiency, render_svg("Efficiency", "fraction of peak", to_series(eff)));
  write(files.bytes_received, render_svg("Data received per worker", "bytes (mean over workers)", to_series(bytes)));
  return files;
}

}  // namespace quadtask
