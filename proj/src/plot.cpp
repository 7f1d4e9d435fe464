#include "spoofshield/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spoofshield {

namespace {

struct Bounds {
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  void pad(double frac) {
    const double px = std::max(1e-6, (xmax - xmin) * frac);
    const double py = std::max(1e-6, (ymax - ymin) * frac);
    xmin -= px, xmax += px, ymin -= py, ymax += py;
  }
};

constexpr int kWidth = 900;
constexpr int kHeight = 500;
constexpr int kMargin = 50;

struct Mapper {
  Bounds b;
  double sx(double x) const {
    return kMargin + (x - b.xmin) / (b.xmax - b.xmin) * (kWidth - 2 * kMargin);
  }
  double sy(double y) const {  // SVG y grows downward
    return kHeight - kMargin - (y - b.ymin) / (b.ymax - b.ymin) * (kHeight - 2 * kMargin);
  }
};

std::string polyline(const Mapper& m, const std::vector<Vec2>& pts, const std::string& color,
                     double width, const std::string& dash = "") {
  std::ostringstream ss;
  ss << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
  if (!dash.empty()) ss << " stroke-dasharray=\"" << dash << "\"";
  ss << " points=\"";
  for (const Vec2& p : pts) ss << m.sx(p.x()) << ',' << m.sy(p.y()) << ' ';
  ss << "\"/>\n";
  return ss.str();
}

void open_svg(std::ofstream& out, const std::string& path, const std::string& title) {
  out.open(path);
  if (!out) throw std::runtime_error("cannot write plot: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" << title << "</text>\n";
}

void legend(std::ofstream& out, const std::vector<std::pair<std::string, std::string>>& entries) {
  int y = 40;
  for (const auto& [color, label] : entries) {
    out << "<line x1=\"" << kWidth - 190 << "\" y1=\"" << y << "\" x2=\"" << kWidth - 160
        << "\" y2=\"" << y << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n"
        << "<text x=\"" << kWidth - 152 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
    y += 18;
  }
}

}  // namespace

void write_trajectory_svg(const std::string& path, const std::vector<TickRecord>& records,
                          const std::vector<SensorFrame>& frames) {
  if (records.empty()) throw std::invalid_argument("plot: empty run");

  Mapper m;
  for (const TickRecord& r : records) {
    m.b.add(r.est.x(), r.est.y());
    if (r.truth) m.b.add(r.truth->x, r.truth->y);
  }
  for (const SensorFrame& f : frames) m.b.add(f.gps.x(), f.gps.y());
  m.b.pad(0.07);

  std::vector<Vec2> truth, est, gps, mitig;
  for (const TickRecord& r : records) {
    est.push_back(r.est);
    if (r.truth) truth.emplace_back(r.truth->x, r.truth->y);
    if (r.mode == FilterMode::mitigation) mitig.push_back(r.est);
  }
  for (const SensorFrame& f : frames) gps.push_back(f.gps);

  std::ofstream out;
  open_svg(out, path, "trajectory");
  if (!gps.empty()) out << polyline(m, gps, "#bbbbbb", 1.0);
  if (!truth.empty()) out << polyline(m, truth, "#1f77b4", 2.0);
  out << polyline(m, est, "#d62728", 1.5, "5,3");
  // mitigation ticks as dots so discontinuous stretches stay visible
  for (const Vec2& p : mitig)
    out << "<circle cx=\"" << m.sx(p.x()) << "\" cy=\"" << m.sy(p.y())
        << "\" r=\"2\" fill=\"#ff7f0e\"/>\n";
  legend(out, {{"#1f77b4", "truth"},
               {"#d62728", "estimate"},
               {"#bbbbbb", "raw gps"},
               {"#ff7f0e", "mitigation"}});
  out << "</svg>\n";
}

void write_residual_svg(const std::string& path, const std::vector<TickRecord>& records,
                        double threshold) {
  if (records.empty()) throw std::invalid_argument("plot: empty run");

  Mapper m;
  for (const TickRecord& r : records) {
    m.b.add(r.t, r.residual_valid ? r.z : 0.0);
    m.b.add(r.t, r.score);
  }
  m.b.add(records.front().t, threshold);
  m.b.pad(0.07);

  std::ofstream out;
  open_svg(out, path, "residual / score");

  // mitigation band
  bool in_band = false;
  double band_start = 0.0;
  auto flush_band = [&](double t_end) {
    out << "<rect x=\"" << m.sx(band_start) << "\" y=\"" << kMargin << "\" width=\""
        << std::max(1.0, m.sx(t_end) - m.sx(band_start)) << "\" height=\""
        << kHeight - 2 * kMargin << "\" fill=\"#ff7f0e\" opacity=\"0.15\"/>\n";
  };
  for (const TickRecord& r : records) {
    const bool mit = r.mode == FilterMode::mitigation;
    if (mit && !in_band) {
      band_start = r.t;
      in_band = true;
    } else if (!mit && in_band) {
      flush_band(r.t);
      in_band = false;
    }
  }
  if (in_band) flush_band(records.back().t);

  std::vector<Vec2> zs, scores;
  for (const TickRecord& r : records) {
    if (r.residual_valid) zs.emplace_back(r.t, r.z);
    scores.emplace_back(r.t, r.score);
  }
  out << polyline(m, zs, "#1f77b4", 1.5);
  out << polyline(m, scores, "#2ca02c", 1.5);
  out << "<line x1=\"" << m.sx(m.b.xmin) << "\" y1=\"" << m.sy(threshold) << "\" x2=\""
      << m.sx(m.b.xmax) << "\" y2=\"" << m.sy(threshold)
      << "\" stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"4,4\"/>\n";
  legend(out, {{"#1f77b4", "residual"},
               {"#2ca02c", "score"},
               {"#d62728", "threshold"},
               {"#ff7f0e", "mitigation"}});
  out << "</svg>\n";
}

}  // namespace spoofshield
