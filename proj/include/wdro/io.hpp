#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdro/matrix.hpp"
#include "wdro/simulate.hpp"

namespace wdro {

/// Shortest round-trip-safe decimal rendering (17 significant digits).
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(path + ": malformed CSV cell '" + cell + "'");
  }
  while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\t' || cell[pos] == '\r')) ++pos;
  if (pos != cell.size()) {
    throw std::invalid_argument(path + ": malformed CSV cell '" + cell + "'");
  }
  if (!std::isfinite(v)) {
    throw std::invalid_argument(path + ": non-finite value in CSV");
  }
  return v;
}

// Numeric rows of a CSV file; '#' comment lines and blank lines are skipped.
inline std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::vector<std::string> cells = split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) row.push_back(parse_cell(cell, path));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument(path + ": ragged CSV rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");
  return rows;
}

}  // namespace detail

/// Data file: n rows by d columns, no header.
inline Matrix read_data_csv(const std::string& path) {
  const auto rows = detail::read_csv_rows(path);
  Matrix data(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.front().size(); ++j) data(i, j) = rows[i][j];
  }
  return data;
}

/// Matrix file: d lines of d comma-separated values; must be square and
/// symmetric up to read-off noise.
inline SymMatrix read_matrix_csv(const std::string& path) {
  const auto rows = detail::read_csv_rows(path);
  const std::size_t d = rows.size();
  if (rows.front().size() != d) {
    throw std::invalid_argument(path + ": matrix file must be square");
  }
  double scale = 1.0;
  for (const auto& row : rows) {
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  SymMatrix out(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      if (std::abs(rows[i][j] - rows[j][i]) > 1e-12 * scale) {
        throw std::invalid_argument(path + ": matrix file is not symmetric");
      }
      out.set(i, j, rows[i][j]);
    }
  }
  return out;
}

/// Writes a matrix as d CSV lines, preceded by '#' metadata comment lines.
inline void write_matrix_csv(const std::string& path, const SymMatrix& m,
                             const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument(path + ": cannot open file for writing");
  for (const std::string& c : comments) out << "# " << c << "\n";
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (std::size_t j = 0; j < m.dim(); ++j) {
      if (j) out << ",";
      out << fmt17(m(i, j));
    }
    out << "\n";
  }
}

/// Log-log scatter of experiment rows with the fitted regression line.
/// Pure string generation; layout is fixed and deterministic.
inline std::string svg_experiment_plot(const ExperimentResult& result) {
  const double width = 640.0, height = 480.0;
  const double ml = 70.0, mr = 24.0, mt = 24.0, mb = 56.0;

  double lx_min = std::numeric_limits<double>::infinity(), lx_max = -lx_min;
  double ly_min = lx_min, ly_max = -lx_min;
  for (const ExperimentRow& row : result.rows) {
    const double lx = std::log10(static_cast<double>(row.n));
    const double ly = std::log10(row.rho_hat);
    lx_min = std::min(lx_min, lx);
    lx_max = std::max(lx_max, lx);
    ly_min = std::min(ly_min, ly);
    ly_max = std::max(ly_max, ly);
  }
  const double x_pad = 0.05 * std::max(lx_max - lx_min, 1e-9);
  const double y_pad = 0.08 * std::max(ly_max - ly_min, 1e-9);
  lx_min -= x_pad;
  lx_max += x_pad;
  ly_min -= y_pad;
  ly_max += y_pad;

  const auto px = [&](double lx) {
    return ml + (lx - lx_min) / (lx_max - lx_min) * (width - ml - mr);
  };
  const auto py = [&](double ly) {
    return height - mb - (ly - ly_min) / (ly_max - ly_min) * (height - mt - mb);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  // Decade ticks with gridlines.
  for (int e = static_cast<int>(std::floor(lx_min)); e <= static_cast<int>(std::ceil(lx_max)); ++e) {
    if (e < lx_min || e > lx_max) continue;
    const double x = px(e);
    svg << "<line x1=\"" << fmt6(x) << "\" y1=\"" << fmt6(mt) << "\" x2=\"" << fmt6(x)
        << "\" y2=\"" << fmt6(height - mb) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt6(x) << "\" y=\"" << fmt6(height - mb + 18.0)
        << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">1e" << e
        << "</text>\n";
  }
  for (int e = static_cast<int>(std::floor(ly_min)); e <= static_cast<int>(std::ceil(ly_max)); ++e) {
    if (e < ly_min || e > ly_max) continue;
    const double y = py(e);
    svg << "<line x1=\"" << fmt6(ml) << "\" y1=\"" << fmt6(y) << "\" x2=\"" << fmt6(width - mr)
        << "\" y2=\"" << fmt6(y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt6(ml - 6.0) << "\" y=\"" << fmt6(y + 4.0)
        << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">1e" << e
        << "</text>\n";
  }

  svg << "<rect x=\"" << fmt6(ml) << "\" y=\"" << fmt6(mt) << "\" width=\"" << fmt6(width - ml - mr)
      << "\" height=\"" << fmt6(height - mt - mb)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Fitted line y = exp(intercept) x^slope, straight in log-log coordinates.
  const double le = std::log10(std::exp(1.0));
  const double ly_at = result.regression.intercept * le + result.regression.slope * (lx_min + x_pad);
  const double ly_bt = result.regression.intercept * le + result.regression.slope * (lx_max - x_pad);
  svg << "<line x1=\"" << fmt6(px(lx_min + x_pad)) << "\" y1=\"" << fmt6(py(ly_at)) << "\" x2=\""
      << fmt6(px(lx_max - x_pad)) << "\" y2=\"" << fmt6(py(ly_bt))
      << "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n";

  for (const ExperimentRow& row : result.rows) {
    svg << "<circle cx=\"" << fmt6(px(std::log10(static_cast<double>(row.n)))) << "\" cy=\""
        << fmt6(py(std::log10(row.rho_hat)))
        << "\" r=\"3.5\" fill=\"#2c3e50\"/>\n";
  }

  svg << "<text x=\"" << fmt6(ml + (width - ml - mr) / 2.0) << "\" y=\"" << fmt6(height - 12.0)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">n</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt6(mt + (height - mt - mb) / 2.0)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt6(mt + (height - mt - mb) / 2.0) << ")\">rho_hat</text>\n";
  svg << "<text x=\"" << fmt6(width - mr - 6.0) << "\" y=\"" << fmt6(mt + 16.0)
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">slope "
      << fmt6(result.regression.slope) << ", R^2 " << fmt6(result.regression.r_squared)
      << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace wdro
