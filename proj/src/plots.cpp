#include "bharnet/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bharnet/errors.hpp"

namespace bharnet::plots {

namespace {

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw InputError(what + ": not a number '" + s + "'");
  }
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split_row(line);
      continue;
    }
    auto row = split_row(line);
    if (row.size() != t.header.size())
      throw InputError(origin + ": row has " + std::to_string(row.size()) + " cells, header has " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InputError(origin + ": empty report");
  if (t.rows.empty()) throw InputError(origin + ": report has no data rows");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open report '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

Series robustness_series(const CsvTable& table, const std::string& label) {
  const auto it = std::find(table.header.begin(), table.header.end(), "accuracy");
  if (it == table.header.end()) throw InputError(label + ": no accuracy column");
  const auto col = static_cast<std::size_t>(it - table.header.begin());
  Series s{label, {}, {}};
  for (const auto& row : table.rows) {
    s.x.push_back(to_double(row[0], label));
    s.y.push_back(to_double(row[col], label));
  }
  return s;
}

std::string line_plot_svg(const std::vector<Series>& series, const std::string& title) {
  if (series.empty()) throw InputError("line_plot_svg: no series");
  const double W = 480, H = 320, L = 60, R = 140, Tp = 40, Bm = 50;
  double x0 = series[0].x.empty() ? 0.0 : series[0].x.front(), x1 = x0;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw InputError("line_plot_svg: malformed series " + s.label);
    for (double x : s.x) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  if (x1 == x0) x1 = x0 + 1.0;
  const double pw = W - L - R, ph = H - Tp - Bm;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return Tp + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W, 0) << "\" height=\"" << num(H, 0)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(W / 2, 1) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
    << "</text>\n";
  o << "<line x1=\"" << num(L, 1) << "\" y1=\"" << num(Tp + ph, 1) << "\" x2=\"" << num(L + pw, 1) << "\" y2=\""
    << num(Tp + ph, 1) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(L, 1) << "\" y1=\"" << num(Tp, 1) << "\" x2=\"" << num(L, 1) << "\" y2=\""
    << num(Tp + ph, 1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    o << "<text x=\"" << num(L - 6, 1) << "\" y=\"" << num(py(y) + 4, 1) << "\" text-anchor=\"end\">" << num(y, 2)
      << "</text>\n";
  }
  for (double x : series[0].x)
    o << "<text x=\"" << num(px(x), 1) << "\" y=\"" << num(Tp + ph + 16, 1) << "\" text-anchor=\"middle\">"
      << num(x, 2) << "</text>\n";
  o << "<text x=\"" << num(L + pw / 2, 1) << "\" y=\"" << num(H - 10, 1)
    << "\" text-anchor=\"middle\">drop rate</text>\n";
  o << "<text x=\"15\" y=\"" << num(Tp + ph / 2, 1) << "\" transform=\"rotate(-90 15 " << num(Tp + ph / 2, 1)
    << ")\" text-anchor=\"middle\">accuracy</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << num(px(s.x[i]), 2) << "," << num(py(s.y[i]), 2);
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o << "<circle class=\"point\" cx=\"" << num(px(s.x[i]), 2) << "\" cy=\"" << num(py(s.y[i]), 2)
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = Tp + 14.0 * static_cast<double>(k);
    o << "<text x=\"" << num(L + pw + 10, 1) << "\" y=\"" << num(ly + 4, 1) << "\" fill=\"" << color << "\">"
      << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string merged_csv(const std::vector<Series>& series) {
  if (series.empty()) throw InputError("merged_csv: no series");
  std::ostringstream o;
  o << "rate";
  for (const auto& s : series) {
    if (s.x != series[0].x) throw InputError("merged_csv: series '" + s.label + "' uses different rates");
    o << "," << s.label;
  }
  o << "\n";
  for (std::size_t i = 0; i < series[0].x.size(); ++i) {
    o << num(series[0].x[i]);
    for (const auto& s : series) o << "," << num(s.y[i]);
    o << "\n";
  }
  return o.str();
}

std::string table_svg(const CsvTable& table, const std::string& title) {
  const double cw = 90, rh = 18, top = 40, left = 10;
  const double W = left * 2 + cw * static_cast<double>(table.header.size());
  const double H = top + rh * static_cast<double>(table.rows.size() + 1) + 10;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W, 0) << "\" height=\"" << num(H, 0)
    << "\" font-family=\"monospace\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(left, 1) << "\" y=\"20\" font-size=\"13\">" << escape(title) << "</text>\n";
  auto row_out = [&](const std::vector<std::string>& cells, double y, bool bold) {
    for (std::size_t c = 0; c < cells.size(); ++c)
      o << "<text x=\"" << num(left + cw * static_cast<double>(c) + 4, 1) << "\" y=\"" << num(y, 1) << "\""
        << (bold ? " font-weight=\"bold\"" : "") << ">" << escape(cells[c]) << "</text>\n";
  };
  row_out(table.header, top + 12, true);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double y = top + rh * static_cast<double>(r + 1);
    if (r % 2 == 0)
      o << "<rect x=\"" << num(left, 1) << "\" y=\"" << num(y, 1) << "\" width=\"" << num(W - 2 * left, 1)
        << "\" height=\"" << num(rh, 1) << "\" fill=\"#f0f0f0\"/>\n";
    row_out(table.rows[r], y + 12, false);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace bharnet::plots
