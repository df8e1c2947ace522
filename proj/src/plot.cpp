#include "irregts/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "irregts/errors.hpp"

namespace irregts::plot {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

size_t column(const CsvTable& t, const std::string& name) {
  for (size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  raise(ErrorKind::Parse, "csv: missing column '" + name + "'");
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  if (t.header.empty()) raise(ErrorKind::Parse, "csv: empty input");
  return t;
}

std::string render_sweep_svg(const CsvTable& report, const std::string& metric) {
  const size_t c_cond = column(report, "condition");
  const size_t c_model = column(report, "model");
  const size_t c_metric = column(report, "metric");
  const size_t c_mean = column(report, "mean");
  const size_t c_std = column(report, "std");

  // condition order of first appearance; models likewise, skipping the
  // derived difference rows
  std::vector<std::string> conditions, models;
  struct Point {
    double mean, sd;
  };
  std::map<std::string, std::map<std::string, Point>> series;  // model -> condition -> point
  for (const auto& row : report.rows) {
    if (row[c_metric] != metric) continue;
    if (row[c_model].rfind("diff(", 0) == 0) continue;
    if (std::find(conditions.begin(), conditions.end(), row[c_cond]) == conditions.end())
      conditions.push_back(row[c_cond]);
    if (std::find(models.begin(), models.end(), row[c_model]) == models.end())
      models.push_back(row[c_model]);
    series[row[c_model]][row[c_cond]] = {std::stod(row[c_mean]), std::stod(row[c_std])};
  }
  if (conditions.empty()) raise(ErrorKind::Empty, "plot: no rows for metric '" + metric + "'");

  double lo = 1e300, hi = -1e300;
  for (const auto& [m, pts] : series)
    for (const auto& [c, p] : pts) {
      lo = std::min(lo, p.mean - p.sd);
      hi = std::max(hi, p.mean + p.sd);
    }
  if (hi <= lo) {
    hi = lo + 1.0;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double W = 640, Hgt = 420, ml = 70, mr = 160, mt = 30, mb = 60;
  const double pw = W - ml - mr, ph = Hgt - mt - mb;
  auto xpos = [&](size_t i) {
    return conditions.size() == 1
               ? ml + pw / 2
               : ml + pw * static_cast<double>(i) / static_cast<double>(conditions.size() - 1);
  };
  auto ypos = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hgt
      << "\" viewBox=\"0 0 " << W << " " << Hgt << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  // y ticks
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = ypos(v);
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  // x ticks: condition labels verbatim
  for (size_t i = 0; i < conditions.size(); ++i) {
    const double x = xpos(i);
    svg << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\""
        << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << conditions[i] << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << Hgt - 16
      << "\" font-size=\"13\" text-anchor=\"middle\">condition</text>\n";
  svg << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + ph / 2
      << ")\">" << metric << "</text>\n";

  size_t mi = 0;
  for (const std::string& m : models) {
    const char* color = kPalette[mi % 8];
    std::ostringstream pts;
    for (size_t i = 0; i < conditions.size(); ++i) {
      auto it = series[m].find(conditions[i]);
      if (it == series[m].end()) continue;
      const double x = xpos(i), y = ypos(it->second.mean);
      pts << x << "," << y << " ";
      // error bar
      const double y0 = ypos(it->second.mean - it->second.sd);
      const double y1 = ypos(it->second.mean + it->second.sd);
      svg << "<line x1=\"" << x << "\" y1=\"" << y0 << "\" x2=\"" << x << "\" y2=\"" << y1
          << "\" stroke=\"" << color << "\"/>\n";
      svg << "<line x1=\"" << x - 3 << "\" y1=\"" << y0 << "\" x2=\"" << x + 3 << "\" y2=\"" << y0
          << "\" stroke=\"" << color << "\"/>\n";
      svg << "<line x1=\"" << x - 3 << "\" y1=\"" << y1 << "\" x2=\"" << x + 3 << "\" y2=\"" << y1
          << "\" stroke=\"" << color << "\"/>\n";
      svg << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    // legend
    const double ly = mt + 14 + 18 * static_cast<double>(mi);
    svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 32
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << ml + pw + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << m
        << "</text>\n";
    ++mi;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_cm_svg(const CsvTable& grid) {
  if (grid.rows.empty()) raise(ErrorKind::Empty, "plot: empty confusion grid");
  const size_t k = grid.rows.size();
  std::vector<std::vector<double>> vals(k, std::vector<double>(k, 0.0));
  double maxv = 0.0;
  for (size_t t = 0; t < k; ++t) {
    if (grid.rows[t].size() != k + 1) raise(ErrorKind::Parse, "plot: ragged confusion grid");
    for (size_t p = 0; p < k; ++p) {
      vals[t][p] = std::stod(grid.rows[t][p + 1]);
      maxv = std::max(maxv, vals[t][p]);
    }
  }
  const double cell = std::max(24.0, std::min(48.0, 480.0 / static_cast<double>(k)));
  const double ml = 60, mt = 50;
  const double W = ml + cell * static_cast<double>(k) + 20;
  const double Hgt = mt + cell * static_cast<double>(k) + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hgt
      << "\" viewBox=\"0 0 " << W << " " << Hgt << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << ml + cell * k / 2 << "\" y=\"16\" font-size=\"12\" "
      << "text-anchor=\"middle\">predicted</text>\n";
  svg << "<text x=\"14\" y=\"" << mt + cell * k / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << mt + cell * k / 2 << ")\">true</text>\n";
  for (size_t p = 0; p < k; ++p) {
    svg << "<text x=\"" << ml + cell * (p + 0.5) << "\" y=\"" << mt - 8
        << "\" font-size=\"11\" text-anchor=\"middle\">" << grid.header[p + 1] << "</text>\n";
  }
  for (size_t t = 0; t < k; ++t) {
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << mt + cell * (t + 0.5) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << grid.rows[t][0] << "</text>\n";
    for (size_t p = 0; p < k; ++p) {
      const double frac = maxv > 0 ? vals[t][p] / maxv : 0.0;
      const int shade = static_cast<int>(255.0 - 205.0 * frac);
      svg << "<rect x=\"" << ml + cell * p << "\" y=\"" << mt + cell * t << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" "
          << "stroke=\"#cccccc\"/>\n";
      svg << "<text x=\"" << ml + cell * (p + 0.5) << "\" y=\"" << mt + cell * (t + 0.5) + 4
          << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(vals[t][p]) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace irregts::plot
