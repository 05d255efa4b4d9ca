#pragma once

// CSV writers for metrics and training losses, a small CSV reader, and SVG
// line charts (one per metric column).

#include "ramp/adaptation.hpp"
#include "ramp/core.hpp"
#include "ramp/qbasis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace ramp::metrics {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline const char* kMetricsHeader =
    "step,episode,episode_return,regression_mse,regression_r2,q_abs_error,variance_penalty_mean,wall_ms";

inline std::string metrics_csv(const std::vector<adaptation::MetricsRow>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.episode << ',' << fmt(r.episode_return) << ',' << fmt(r.regression_mse) << ','
        << fmt(r.regression_r2) << ',' << fmt(r.q_abs_error) << ',' << fmt(r.variance_penalty_mean) << ','
        << fmt(r.wall_ms) << "\n";
  return out.str();
}

inline std::string eval_csv(const std::vector<adaptation::EvalRecord>& evals, const std::vector<double>& random_returns) {
  std::ostringstream out;
  out << "step,episode,return,random_return\n";
  for (const auto& e : evals)
    for (std::size_t i = 0; i < e.returns.size(); ++i)
      out << e.step << ',' << i << ',' << fmt(e.returns[i]) << ','
          << fmt(i < random_returns.size() ? random_returns[i] : 0.0) << "\n";
  return out.str();
}

inline std::string loss_csv(const std::vector<qbasis::LossRecord>& log) {
  std::ostringstream out;
  out << "member,epoch,step,loss\n";
  for (const auto& r : log) out << r.member << ',' << r.epoch << ',' << r.step << ',' << fmt(r.loss) << "\n";
  return out.str();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Numeric CSV with a header row. Non-numeric cells are rejected.
inline Table parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Table t;
  if (!std::getline(in, line) || line.empty()) throw InvalidArgument("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  t.columns.resize(t.header.size());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw InvalidArgument("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(t.header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size())
        throw InvalidArgument("csv: non-numeric cell '" + cells[c] + "' on line " + std::to_string(lineno));
      t.columns[c].push_back(v);
    }
  }
  if (t.rows() == 0) throw InvalidArgument("csv: no data rows");
  return t;
}

/// "Nice" tick positions covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v == 0.0 ? 0.0 : v);
  return out;
}

inline std::string svg_line_chart(const std::vector<double>& x, const std::vector<double>& y, const std::string& xlabel,
                                  const std::string& ylabel) {
  require(x.size() == y.size() && !x.empty(), "plot: series must be non-empty and of equal length");
  const double W = 640, Hh = 400, left = 80, right = 20, top = 30, bottom = 60;
  double x0 = *std::min_element(x.begin(), x.end()), x1 = *std::max_element(x.begin(), x.end());
  double y0 = *std::min_element(y.begin(), y.end()), y1 = *std::max_element(y.begin(), y.end());
  if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
  const double pw = W - left - right, ph = Hh - top - bottom;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << ylabel << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (double t : ticks(x0, x1))
    s << "<text x=\"" << fmt(px(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  for (double t : ticks(y0, y1))
    s << "<text x=\"" << left - 6 << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << Hh - 15 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  s << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << top + ph / 2
    << ")\">" << ylabel << "</text>\n";
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? " " : "") << fmt(px(x[i])) << ',' << fmt(py(y[i]));
  s << "\"/>\n</svg>\n";
  return s.str();
}

/// One (column name, SVG) per column after the first, plotted against the first column.
inline std::vector<std::pair<std::string, std::string>> plot_csv(const std::string& text) {
  const Table t = parse_csv(text);
  require(t.header.size() >= 2, "plot: need an x column and at least one metric column");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t c = 1; c < t.header.size(); ++c)
    out.emplace_back(t.header[c], svg_line_chart(t.columns[0], t.columns[c], t.header[0], t.header[c]));
  return out;
}

}  // namespace ramp::metrics
