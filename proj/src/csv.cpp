#include "nvcavity/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace nvcavity::csv {

namespace {

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

std::optional<std::string> Table::meta_value(const std::string &key) const {
  for (const auto &[k, v] : meta) {
    if (k == key) {
      return v;
    }
  }
  return std::nullopt;
}

std::vector<double> Table::numeric(const std::string &column) const {
  std::size_t idx = columns.size();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == column) {
      idx = i;
    }
  }
  if (idx == columns.size()) {
    throw InvalidArgument("csv", "missing column '" + column + "'");
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto &row : rows) {
    out.push_back(parse_number(row.at(idx)));
  }
  return out;
}

bool Table::has_columns(const std::string &first, const std::string &second) const {
  return columns.size() == 2 && columns[0] == first && columns[1] == second;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string &text) {
  const std::string s = trim(text);
  if (s.empty()) {
    throw InvalidArgument("csv", "empty numeric cell");
  }
  errno = 0;
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw InvalidArgument("csv", "not a number: '" + s + "'");
  }
  return v;
}

void write(std::ostream &os, const Table &t) {
  for (const auto &[k, v] : t.meta) {
    os << "# " << k << ": " << v << '\n';
  }
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    os << (i ? "," : "") << t.columns[i];
  }
  os << '\n';
  for (const auto &row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << (i ? "," : "") << row[i];
    }
    os << '\n';
  }
}

void write_file(const std::filesystem::path &path, const Table &t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw InvalidArgument("csv", "cannot open " + path.string() + " for writing");
  }
  write(os, t);
}

Table read(std::istream &is) {
  Table t;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (trim(line).empty()) {
      continue;
    }
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        t.meta.emplace_back(trim(line.substr(1, colon - 1)), trim(line.substr(colon + 1)));
      }
      continue;
    }
    auto cells = split(line);
    if (t.columns.empty()) {
      t.columns = std::move(cells);
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw InvalidArgument("csv", "line " + std::to_string(lineno) + ": expected " +
                                       std::to_string(t.columns.size()) + " cells, found " +
                                       std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table read_file(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw InvalidArgument("csv", "cannot open " + path.string());
  }
  return read(is);
}

Table two_column(const std::string &x_name, const std::vector<double> &x, const std::string &y_name,
                 const std::vector<double> &y, const std::string &unit) {
  if (x.size() != y.size()) {
    throw InvalidArgument("csv", "column lengths differ");
  }
  Table t;
  t.meta.emplace_back("unit", unit);
  t.columns = {x_name, y_name};
  t.rows.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    t.rows.push_back({format_number(x[i]), format_number(y[i])});
  }
  return t;
}

Table from_time_series(const TimeSeries &s) {
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    t[i] = s.time(i);
  }
  Table out = two_column("time_s", t, "value", s.values, s.unit);
  out.meta.emplace_back("rate_hz", format_number(s.rate));
  return out;
}

TimeSeries to_time_series(const Table &t) {
  if (!t.has_columns("time_s", "value")) {
    throw InvalidArgument("csv", "expected a time_s,value table");
  }
  TimeSeries s;
  s.unit = t.meta_value("unit").value_or("");
  s.values = t.numeric("value");
  const auto times = t.numeric("time_s");
  if (!times.empty()) {
    s.t0 = times.front();
  }
  if (auto rate = t.meta_value("rate_hz")) {
    s.rate = parse_number(*rate);
  } else if (times.size() > 1) {
    s.rate = static_cast<double>(times.size() - 1) / (times.back() - times.front());
  }
  if (!s.values.empty() && !(s.rate > 0.0 && std::isfinite(s.rate))) {
    throw InvalidArgument("csv", "cannot determine the sample rate");
  }
  return s;
}

Table from_spectrum(const Spectrum &s) { return two_column("freq_hz", s.freq, "asd", s.asd, s.unit); }

Spectrum to_spectrum(const Table &t) {
  if (!t.columns.empty() && !t.has_columns("freq_hz", "asd")) {
    throw InvalidArgument("csv", "expected a freq_hz,asd table");
  }
  Spectrum s;
  s.unit = t.meta_value("unit").value_or("");
  if (!t.columns.empty()) {
    s.freq = t.numeric("freq_hz");
    s.asd = t.numeric("asd");
  }
  return s;
}

Table from_dispersive(const lockin::DispersiveCurve &c, const std::string &unit) {
  return two_column("detuning_hz", c.detunings, "lockin_out", c.lockin_out, unit);
}

Curve to_curve(const Table &t) {
  if (t.columns.size() != 2) {
    throw InvalidArgument("csv", "expected a two-column table");
  }
  return {t.numeric(t.columns[0]), t.numeric(t.columns[1])};
}

void write_plot_data(const std::filesystem::path &path, const std::vector<double> &x,
                     const std::vector<double> &y, const std::string &comment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw InvalidArgument("csv", "cannot open " + path.string() + " for writing");
  }
  os << "# " << comment << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    os << format_number(x[i]) << ' ' << format_number(y[i]) << '\n';
  }
}

} // namespace nvcavity::csv
