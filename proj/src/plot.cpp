#include "qfedtd/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <string_view>

#include "qfedtd/error.hpp"

namespace qfedtd {

namespace {

constexpr std::string_view kHeader = "run_id,seed,k,N,p,bits,alpha,delta_sq";

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::ConfigError, "CSV line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    malformed(line, "bad field '" + std::string(s) + "'");
  }
  return v;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target_ticks) {
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (f * mag >= raw) return f * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::vector<CsvSeries> read_sweep_csv(const std::string& csv_text) {
  struct Acc {
    CsvSeries series;
    std::set<unsigned long long> seeds;
    std::map<std::size_t, std::pair<double, std::size_t>> by_k;
  };
  std::map<std::size_t, Acc> runs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < csv_text.size()) {
    std::size_t end = csv_text.find('\n', pos);
    if (end == std::string::npos) end = csv_text.size();
    std::string_view line(csv_text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kHeader) malformed(line_no, "expected header " + std::string(kHeader));
      header_seen = true;
      continue;
    }
    std::string_view f[8];
    std::size_t count = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (count == 8) malformed(line_no, "too many fields");
        f[count++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (count != 8) malformed(line_no, "expected 8 fields");
    const auto run_id = parse_field<std::size_t>(f[0], line_no);
    auto& acc = runs[run_id];
    auto& s = acc.series;
    const auto N = parse_field<std::size_t>(f[3], line_no);
    const auto p = parse_field<double>(f[4], line_no);
    const auto bits = parse_field<int>(f[5], line_no);
    const auto alpha = parse_field<double>(f[6], line_no);
    if (acc.by_k.empty()) {
      s.run_id = run_id;
      s.N = N;
      s.p = p;
      s.bits = bits;
      s.alpha = alpha;
    } else if (s.N != N || s.p != p || s.bits != bits || s.alpha != alpha) {
      malformed(line_no, "run_id " + std::to_string(run_id) + " changes its settings");
    }
    acc.seeds.insert(parse_field<unsigned long long>(f[1], line_no));
    auto& cell = acc.by_k[parse_field<std::size_t>(f[2], line_no)];
    cell.first += parse_field<double>(f[7], line_no);
    cell.second += 1;
  }
  if (!header_seen) malformed(1, "empty file");

  std::vector<CsvSeries> out;
  for (auto& [id, acc] : runs) {
    acc.series.seeds = acc.seeds.size();
    for (const auto& [k, cell] : acc.by_k) {
      acc.series.k.push_back(k);
      acc.series.mean.push_back(cell.first / static_cast<double>(cell.second));
    }
    out.push_back(std::move(acc.series));
  }
  return out;
}

std::string series_label(const CsvSeries& s, bool with_alpha) {
  char buf[160];
  if (s.bits == 0 && s.p == 1.0) {
    std::snprintf(buf, sizeof buf, "FedTD, N=%zu", s.N);
  } else if (s.bits == 0) {
    std::snprintf(buf, sizeof buf, "QFedTD, N=%zu, p=%g, unquantized", s.N, s.p);
  } else {
    std::snprintf(buf, sizeof buf, "QFedTD, N=%zu, p=%g, %d bits", s.N, s.p, s.bits);
  }
  std::string label = buf;
  if (with_alpha) {
    std::snprintf(buf, sizeof buf, ", alpha=%g", s.alpha);
    label += buf;
  }
  return label;
}

std::string render_svg(const std::vector<CsvSeries>& series, const std::string& title) {
  constexpr double kWidth = 760, kHeight = 460;
  constexpr double kLeft = 70, kRight = 250, kTop = 40, kBottom = 50;
  constexpr std::size_t kMaxPoints = 1000;
  static const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::size_t k_max = 1;
  double y_min = std::numeric_limits<double>::infinity(), y_max = 0;
  std::set<double> alphas;
  for (const auto& s : series) {
    alphas.insert(s.alpha);
    if (!s.k.empty()) k_max = std::max(k_max, s.k.back());
    for (double v : s.mean) {
      if (v > 0) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
      }
    }
  }
  if (!(y_max > 0)) {
    y_min = 0.1;
    y_max = 1.0;
  }
  const double lo = std::floor(std::log10(y_min));
  const double hi = std::max(lo + 1, std::ceil(std::log10(y_max)));
  auto x_of = [&](double k) { return kLeft + plot_w * k / static_cast<double>(k_max); };
  auto y_of = [&](double v) {
    const double l = v > 0 ? std::log10(v) : lo;
    return kTop + plot_h * (hi - std::max(lo, l)) / (hi - lo);
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) +
         "\" height=\"" + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         escape_xml(title) + "</text>\n";

  // Decade grid on y, round-number ticks on x.
  for (double d = lo; d <= hi + 1e-9; d += 1) {
    const double y = kTop + plot_h * (hi - d) / (hi - lo);
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + plot_w) +
           "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof lbl, "1e%d", static_cast<int>(d));
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
           lbl + "</text>\n";
  }
  const double step = nice_step(static_cast<double>(k_max), 5);
  for (double k = 0; k <= static_cast<double>(k_max) + 1e-9; k += step) {
    const double x = x_of(k);
    svg += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" + num(x) +
           "\" y2=\"" + num(kTop + plot_h + 5) + "\" stroke=\"black\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof lbl, "%.0f", k);
    svg += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + plot_h + 18) +
           "\" text-anchor=\"middle\">" + lbl + "</text>\n";
  }
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w) +
         "\" height=\"" + num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 10) +
         "\" text-anchor=\"middle\">iteration k</text>\n";
  svg += "<text transform=\"translate(18," + num(kTop + plot_h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">mean squared error to fixed point</text>\n";

  const bool with_alpha = alphas.size() > 1;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    const std::size_t stride = std::max<std::size_t>(1, (s.k.size() + kMaxPoints - 1) / kMaxPoints);
    std::string points;
    for (std::size_t j = 0; j < s.k.size(); ++j) {
      if (j % stride != 0 && j + 1 != s.k.size()) continue;
      if (!points.empty()) points += ' ';
      points += num(x_of(static_cast<double>(s.k[j]))) + "," + num(y_of(s.mean[j]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    const double lx = kLeft + plot_w + 12;
    svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 22) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly) + "\">" +
           escape_xml(series_label(s, with_alpha)) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_svg_from_csv(const std::string& csv_text, const std::string& title) {
  return render_svg(read_sweep_csv(csv_text), title);
}

}  // namespace qfedtd
