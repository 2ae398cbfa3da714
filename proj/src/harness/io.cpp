#include "advcf/harness/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace advcf::harness {

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void Table::add_row(std::string row_name, std::vector<double> v) {
  if (v.size() != columns.size()) throw std::invalid_argument("table " + name + ": row width mismatch");
  rows.push_back(std::move(row_name));
  values.push_back(std::move(v));
}

std::size_t Table::row(std::string_view n) const {
  const auto it = std::find(rows.begin(), rows.end(), n);
  if (it == rows.end()) throw std::out_of_range("table " + name + ": no row '" + std::string(n) + "'");
  return static_cast<std::size_t>(it - rows.begin());
}

std::size_t Table::column(std::string_view n) const {
  const auto it = std::find(columns.begin(), columns.end(), n);
  if (it == columns.end()) throw std::out_of_range("table " + name + ": no column '" + std::string(n) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::at(std::string_view r, std::string_view c) const { return values[row(r)][column(c)]; }

// NaN is stored as null so the JSON stays standard.
void to_json(nlohmann::json& j, const Table& t) {
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& r : t.values) {
    nlohmann::json row = nlohmann::json::array();
    for (double v : r) row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    vals.push_back(std::move(row));
  }
  j = {{"name", t.name}, {"columns", t.columns}, {"rows", t.rows}, {"values", vals}};
}

void from_json(const nlohmann::json& j, Table& t) {
  t.name = j.at("name").get<std::string>();
  t.columns = j.at("columns").get<std::vector<std::string>>();
  t.rows = j.at("rows").get<std::vector<std::string>>();
  t.values.clear();
  for (const auto& r : j.at("values")) {
    std::vector<double> row;
    for (const auto& v : r) row.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    t.values.push_back(std::move(row));
  }
}

std::string to_csv(const Table& t, int decimals) {
  std::ostringstream out;
  out << "method";
  for (const auto& c : t.columns) out << ',' << c;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out << t.rows[r];
    for (double v : t.values[r]) {
      if (std::isnan(v)) {
        out << ",N/A";
      } else {
        std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
        out << ',' << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

void check_layout(const std::vector<Table>& tables) {
  if (tables.empty()) throw std::invalid_argument("no tables to aggregate");
  for (const auto& t : tables) {
    if (t.columns != tables.front().columns || t.rows != tables.front().rows) {
      throw std::invalid_argument("table " + t.name + ": layouts differ across seeds");
    }
  }
}

template <class F>
Table cellwise(const std::vector<Table>& tables, F f) {
  check_layout(tables);
  Table out = tables.front();
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
      std::vector<double> xs;
      for (const auto& t : tables) xs.push_back(t.values[r][c]);
      out.values[r][c] = f(xs);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

Table table_mean(const std::vector<Table>& tables) { return cellwise(tables, mean_of); }

Table table_std(const std::vector<Table>& tables) {
  return cellwise(tables, [](const std::vector<double>& xs) {
    if (xs.size() < 2) return std::isnan(xs.front()) ? xs.front() : 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
  });
}

std::string histogram_svg(const metrics::Histogram& before, const metrics::Histogram& after, std::string_view title) {
  if (before.counts.size() != after.counts.size()) throw std::invalid_argument("histograms have different bins");
  const double w = 480, h = 300, left = 50, bottom = 40, top = 40;
  const std::size_t bins = before.counts.size();
  std::size_t peak = 1;
  for (std::size_t i = 0; i < bins; ++i) peak = std::max({peak, before.counts[i], after.counts[i]});
  const double plot_w = w - left - 20, plot_h = h - top - bottom;
  const double bw = plot_w / static_cast<double>(bins);
  std::ostringstream s;
  char buf[256];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  auto bars = [&](const metrics::Histogram& hist, const char* color, double shift) {
    for (std::size_t i = 0; i < bins; ++i) {
      const double bh = plot_h * static_cast<double>(hist.counts[i]) / static_cast<double>(peak);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\" fill-opacity=\"0.6\"/>\n",
                    left + bw * static_cast<double>(i) + shift, top + plot_h - bh, bw / 2, bh, color);
      s << buf;
    }
  };
  bars(before, "orange", 0.0);
  bars(after, "steelblue", bw / 2);
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                top + plot_h, left + plot_w, top + plot_h);
  s << buf;
  for (std::size_t i = 0; i <= bins; i += 2) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"10\">%g</text>\n",
                  left + bw * static_cast<double>(i), top + plot_h + 14, before.bin_lo(i));
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\">max %zu</text>\n", 4.0, top, peak);
  s << buf;
  s << "<text x=\"" << w - 150 << "\" y=\"" << h - 8 << "\" font-size=\"11\" fill=\"orange\">before</text>\n";
  s << "<text x=\"" << w - 90 << "\" y=\"" << h - 8 << "\" font-size=\"11\" fill=\"steelblue\">after</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace advcf::harness
