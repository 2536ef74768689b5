#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace qfedtd {

/// Seed-averaged curve of one run_id read back from a sweep CSV.
struct CsvSeries {
  std::size_t run_id = 0;
  std::size_t N = 0;
  double p = 1;
  int bits = 0;
  double alpha = 0;
  std::size_t seeds = 0;
  std::vector<std::size_t> k;
  std::vector<double> mean;
};

/// Parses a CSV with the sweep header and averages delta_sq over seeds at
/// every k. Throws ConfigError on a malformed file.
std::vector<CsvSeries> read_sweep_csv(const std::string& csv_text);

/// "FedTD, N=40" for the unquantized lossless case, otherwise
/// "QFedTD, N=40, p=0.6, 4 bits".
std::string series_label(const CsvSeries& series, bool with_alpha);

/// SVG 1.1 line chart of the mean curves with a logarithmic y axis. A pure
/// function of its inputs.
std::string render_svg(const std::vector<CsvSeries>& series, const std::string& title);
std::string render_svg_from_csv(const std::string& csv_text, const std::string& title);

}  // namespace qfedtd
