#pragma once

#include <string>
#include <vector>

namespace bharnet::plots {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws InputError when the file is missing, has no header or no data rows.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "csv");

/// First column as x, the `accuracy` column as y.
Series robustness_series(const CsvTable& table, const std::string& label);

/// Accuracy-vs-drop-rate line chart, one polyline and one marker per point.
std::string line_plot_svg(const std::vector<Series>& series, const std::string& title);
/// Merged "rate,<label>..." table. All series must share the same x values.
std::string merged_csv(const std::vector<Series>& series);

/// Renders a sweep table (scales and accuracy) as an SVG grid.
std::string table_svg(const CsvTable& table, const std::string& title);

}  // namespace bharnet::plots
