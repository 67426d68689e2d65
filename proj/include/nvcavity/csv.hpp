#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvcavity/error.hpp"
#include "nvcavity/lockin.hpp"
#include "nvcavity/signal.hpp"

namespace nvcavity::csv {

/// Comma-separated table with `# key: value` metadata lines ahead of the header.
/// Cells are kept as text; numbers are written with 17 significant digits so a
/// read/write cycle reproduces the file byte for byte.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::string> meta_value(const std::string &key) const;
  /// Numeric column by header name. Throws InvalidArgument if absent or non-numeric.
  std::vector<double> numeric(const std::string &column) const;
  bool has_columns(const std::string &first, const std::string &second) const;
};

std::string format_number(double v);

/// Strict decimal parse of the full string. Throws InvalidArgument.
double parse_number(const std::string &text);

void write(std::ostream &os, const Table &t);
void write_file(const std::filesystem::path &path, const Table &t);

/// An empty input yields a table without columns or rows.
Table read(std::istream &is);
Table read_file(const std::filesystem::path &path);

/// Two numeric columns with the given headers and unit.
Table two_column(const std::string &x_name, const std::vector<double> &x, const std::string &y_name,
                 const std::vector<double> &y, const std::string &unit);

Table from_time_series(const TimeSeries &s);
TimeSeries to_time_series(const Table &t);

Table from_spectrum(const Spectrum &s);
Spectrum to_spectrum(const Table &t);

Table from_dispersive(const lockin::DispersiveCurve &c, const std::string &unit = "V");
Curve to_curve(const Table &t);

/// Whitespace-separated two-column file for gnuplot.
void write_plot_data(const std::filesystem::path &path, const std::vector<double> &x,
                     const std::vector<double> &y, const std::string &comment);

} // namespace nvcavity::csv
