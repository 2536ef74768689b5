#include "qfedtd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "qfedtd/config.hpp"
#include "qfedtd/error.hpp"
#include "qfedtd/model_io.hpp"
#include "qfedtd/parallel.hpp"
#include "qfedtd/verify.hpp"

namespace qfedtd {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::ConfigError, what);
}

void reject_unknown(const json& table, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!table.is_object()) config_error("'" + where + "' must be a table");
  for (const auto& [key, value] : table.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t as_uint(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    config_error("'" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

int as_bits(const json& v, const std::string& key) {
  const auto b = as_uint(v, key);
  if (b > 30) config_error("'" + key + "' must be 0 (identity) or 1..30");
  return static_cast<int>(b);
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) config_error("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) config_error("'" + key + "' must be true or false");
  return v.get<bool>();
}

template <typename T, typename F>
std::vector<T> as_list(const json& v, const std::string& key, F convert) {
  std::vector<T> out;
  if (!v.is_array()) {
    out.push_back(convert(v, key));
    return out;
  }
  for (const auto& item : v) out.push_back(convert(item, key));
  if (out.empty()) config_error("'" + key + "' must not be empty");
  return out;
}

Variant variant_from_json(const json& t, const std::string& where) {
  reject_unknown(t, {"N", "p", "bits", "alpha"}, where);
  Variant v;
  if (t.contains("N")) v.N = as_uint(t["N"], "N");
  if (t.contains("p")) v.p = as_double(t["p"], "p");
  if (t.contains("bits")) v.bits = as_bits(t["bits"], "bits");
  if (t.contains("alpha")) v.alpha = as_double(t["alpha"], "alpha");
  return v;
}

std::string describe(const SweepPoint& pt, double alpha) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "N=%zu p=%g bits=%d alpha=%g", pt.N, pt.p, pt.bits, alpha);
  return buf;
}

bool is_fedtd(const SweepPoint& pt) { return pt.bits == 0 && pt.p == 1.0; }

}  // namespace

ExperimentSpec experiment_from_json(const json& doc) {
  reject_unknown(doc,
                 {"name", "seeds", "output_dir", "csv_stride", "model", "run", "sweep", "variant"},
                 "top level");
  ExperimentSpec spec;
  if (doc.contains("name")) spec.name = as_string(doc["name"], "name");
  if (doc.contains("seeds")) spec.seeds = as_uint(doc["seeds"], "seeds");
  if (doc.contains("output_dir")) spec.output_dir = as_string(doc["output_dir"], "output_dir");
  if (doc.contains("csv_stride")) spec.csv_stride = as_uint(doc["csv_stride"], "csv_stride");

  if (doc.contains("model")) {
    const auto& t = doc["model"];
    reject_unknown(t, {"n", "m", "gamma", "seed", "path"}, "[model]");
    if (t.contains("n")) spec.model.n = as_uint(t["n"], "model.n");
    if (t.contains("m")) spec.model.m = as_uint(t["m"], "model.m");
    if (t.contains("gamma")) spec.model.gamma = as_double(t["gamma"], "model.gamma");
    if (t.contains("seed")) spec.model.seed = as_uint(t["seed"], "model.seed");
    if (t.contains("path")) spec.model.path = as_string(t["path"], "model.path");
  }

  if (doc.contains("run")) {
    const auto& t = doc["run"];
    reject_unknown(t,
                   {"N", "T", "alpha", "step_size", "p", "bits", "scaling", "master_seed", "s0",
                    "normalize_by_survivors", "theta0"},
                   "[run]");
    auto& b = spec.base;
    if (t.contains("N")) b.N = as_uint(t["N"], "run.N");
    if (t.contains("T")) b.T = as_uint(t["T"], "run.T");
    if (t.contains("alpha")) b.step_size = StepSizeSchedule::constant(as_double(t["alpha"], "run.alpha"));
    if (t.contains("step_size")) {
      const auto kind = as_string(t["step_size"], "run.step_size");
      if (kind == "corollary") {
        if (t.contains("alpha")) config_error("run.alpha conflicts with step_size = \"corollary\"");
        b.step_size = StepSizeSchedule::corollary();
      } else if (kind != "constant") {
        config_error("run.step_size must be \"constant\" or \"corollary\"");
      }
    }
    if (t.contains("p")) b.erasure.p = as_double(t["p"], "run.p");
    if (t.contains("bits")) spec.bits = as_bits(t["bits"], "run.bits");
    if (t.contains("scaling")) {
      const auto s = as_string(t["scaling"], "run.scaling");
      if (s == "l2") {
        spec.scaling = QuantizerScaling::L2;
      } else if (s == "linf") {
        spec.scaling = QuantizerScaling::LInf;
      } else {
        config_error("run.scaling must be \"l2\" or \"linf\"");
      }
    }
    if (t.contains("master_seed")) b.master_seed = as_uint(t["master_seed"], "run.master_seed");
    if (t.contains("s0")) b.s0 = as_uint(t["s0"], "run.s0");
    if (t.contains("normalize_by_survivors")) {
      b.normalize_by_survivors = as_bool(t["normalize_by_survivors"], "run.normalize_by_survivors");
    }
    if (t.contains("theta0")) {
      const auto values = as_list<double>(t["theta0"], "run.theta0", as_double);
      b.theta0 = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
  }

  if (doc.contains("sweep")) {
    const auto& t = doc["sweep"];
    reject_unknown(t, {"N", "p", "bits", "alpha"}, "[sweep]");
    auto to_size = [](const json& v, const std::string& k) -> std::size_t { return as_uint(v, k); };
    if (t.contains("N")) spec.sweep.N = as_list<std::size_t>(t["N"], "sweep.N", to_size);
    if (t.contains("p")) spec.sweep.p = as_list<double>(t["p"], "sweep.p", as_double);
    if (t.contains("bits")) spec.sweep.bits = as_list<int>(t["bits"], "sweep.bits", as_bits);
    if (t.contains("alpha")) spec.sweep.alpha = as_list<double>(t["alpha"], "sweep.alpha", as_double);
  }

  if (doc.contains("variant")) {
    const auto& arr = doc["variant"];
    if (!arr.is_array()) config_error("variants must be written as [[variant]] tables");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      spec.sweep.variants.push_back(variant_from_json(arr[i], "[[variant]] #" + std::to_string(i + 1)));
    }
  }
  validate_experiment(spec);
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  return experiment_from_json(load_toml(path));
}

void validate_experiment(const ExperimentSpec& spec) {
  if (spec.seeds == 0) config_error("seeds must be >= 1");
  if (spec.csv_stride == 0) config_error("csv_stride must be >= 1");
  if (spec.base.T == 0) config_error("run.T must be >= 1");
  if (spec.name.empty() || spec.name.find('/') != std::string::npos) {
    config_error("name must be a non-empty file stem");
  }
  auto check_point = [](std::optional<std::size_t> N, std::optional<double> p,
                        std::optional<double> alpha) {
    if (N && *N == 0) config_error("N must be >= 1");
    if (p && !(*p > 0.0 && *p <= 1.0)) config_error("p must lie in (0, 1]");
    if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) config_error("alpha must be positive");
  };
  check_point(spec.base.N, spec.base.erasure.p,
              spec.base.step_size.kind == StepSizeSchedule::Kind::Constant
                  ? std::optional<double>(spec.base.step_size.alpha)
                  : std::nullopt);
  for (auto N : spec.sweep.N) check_point(N, std::nullopt, std::nullopt);
  for (auto p : spec.sweep.p) check_point(std::nullopt, p, std::nullopt);
  for (auto a : spec.sweep.alpha) check_point(std::nullopt, std::nullopt, a);
  for (const auto& v : spec.sweep.variants) check_point(v.N, v.p, v.alpha);
}

Model load_experiment_model(const ModelSource& source) {
  if (!source.path.empty()) return load_model(source.path);
  return generate_synthetic(source.n, source.m, source.gamma, source.seed);
}

SweepPoint base_point(const ExperimentSpec& spec) {
  SweepPoint pt;
  pt.N = spec.base.N;
  pt.p = spec.base.erasure.p;
  pt.bits = spec.bits;
  return pt;
}

std::vector<SweepPoint> expand_grid(const ExperimentSpec& spec) {
  std::vector<Variant> variants = spec.sweep.variants;
  if (variants.empty()) variants.emplace_back();
  std::vector<SweepPoint> points;
  for (const auto& v : variants) {
    SweepPoint start = base_point(spec);
    if (v.N) start.N = *v.N;
    if (v.p) start.p = *v.p;
    if (v.bits) start.bits = *v.bits;
    if (v.alpha) start.alpha = *v.alpha;
    // A field fixed by the variant is not swept.
    const auto Ns = spec.sweep.N.empty() || v.N ? std::vector<std::size_t>{start.N} : spec.sweep.N;
    const auto ps = spec.sweep.p.empty() || v.p ? std::vector<double>{start.p} : spec.sweep.p;
    const auto bs = spec.sweep.bits.empty() || v.bits ? std::vector<int>{start.bits} : spec.sweep.bits;
    std::vector<std::optional<double>> as;
    if (spec.sweep.alpha.empty() || v.alpha) {
      as.push_back(start.alpha);
    } else {
      for (double a : spec.sweep.alpha) as.emplace_back(a);
    }
    for (auto N : Ns)
      for (auto p : ps)
        for (auto b : bs)
          for (const auto& a : as) points.push_back(SweepPoint{N, p, b, a});
  }
  return points;
}

RunConfig make_run_config(const ExperimentSpec& spec, const SweepPoint& point, std::size_t m) {
  RunConfig cfg = spec.base;
  cfg.N = point.N;
  cfg.erasure = ErasureSpec::with_success_probability(point.p);
  cfg.quantizer = point.bits == 0 ? QuantizerSpec::identity()
                                  : QuantizerSpec::stochastic_uniform(point.bits, m, spec.scaling);
  if (point.alpha) cfg.step_size = StepSizeSchedule::constant(*point.alpha);
  return cfg;
}

std::vector<double> SweepResult::mean(std::size_t point) const {
  return mean_curve(curves.at(point));
}

SweepResult run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points,
                      const Model& model, const OracleBundle& oracle, std::size_t threads) {
  validate_experiment(spec);
  const std::size_t m = model.features.m();
  SweepResult result;
  result.points = points;
  result.master_seed = spec.base.master_seed;
  result.seeds = spec.seeds;
  result.curves.assign(points.size(), std::vector<std::vector<double>>(spec.seeds));

  std::vector<RunConfig> configs;
  for (const auto& pt : points) {
    configs.push_back(make_run_config(spec, pt, m));
    validate_config(configs.back(), model);
    const auto report = check_step_size(configs.back(), model, oracle);
    result.alphas.push_back(report.alpha);
  }

  parallel_for(points.size() * spec.seeds, threads, [&](std::size_t job) {
    const std::size_t i = job / spec.seeds;
    const std::size_t j = job % spec.seeds;
    RunConfig cfg = configs[i];
    cfg.master_seed = spec.base.master_seed + j;
    try {
      result.curves[i][j] = run_qfedtd(cfg, model, oracle).delta_sq;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Divergence) throw;
      throw Error(ErrorKind::Divergence, "run_id " + std::to_string(i) + " (" +
                                             describe(points[i], result.alphas[i]) + ") seed " +
                                             std::to_string(cfg.master_seed) + ": " + e.what());
    }
  });
  return result;
}

std::string to_csv(const SweepResult& result, std::size_t stride) {
  if (stride == 0) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  std::string out = "run_id,seed,k,N,p,bits,alpha,delta_sq\n";
  char prefix[128];
  char row[320];
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& pt = result.points[i];
    for (std::size_t j = 0; j < result.curves[i].size(); ++j) {
      const auto& curve = result.curves[i][j];
      std::snprintf(prefix, sizeof prefix, "%zu,%llu,", i,
                    static_cast<unsigned long long>(result.master_seed + j));
      for (std::size_t k = 0; k < curve.size(); ++k) {
        if (k % stride != 0 && k + 1 != curve.size()) continue;
        std::snprintf(row, sizeof row, "%s%zu,%zu,%.17g,%d,%.17g,%.17g\n", prefix, k, pt.N, pt.p,
                      pt.bits, result.alphas[i], curve[k]);
        out += row;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

std::optional<FigureId> figure_from_name(const std::string& name) {
  if (name == "fig1") return FigureId::Fig1;
  if (name == "fig2") return FigureId::Fig2;
  if (name == "fig3") return FigureId::Fig3;
  if (name == "speedup") return FigureId::Speedup;
  return std::nullopt;
}

std::string figure_name(FigureId id) {
  switch (id) {
    case FigureId::Fig1: return "fig1";
    case FigureId::Fig2: return "fig2";
    case FigureId::Fig3: return "fig3";
    case FigureId::Speedup: return "speedup";
  }
  return "figure";
}

ExperimentSpec figure_spec(FigureId id) {
  ExperimentSpec spec;
  spec.name = figure_name(id);
  spec.seeds = 32;
  spec.csv_stride = 10;
  spec.base.N = 40;
  spec.base.T = 5000;
  spec.base.step_size = StepSizeSchedule::constant(0.6);
  spec.base.erasure = ErasureSpec::with_success_probability(0.6);
  spec.bits = 4;
  switch (id) {
    case FigureId::Fig1: {
      Variant fedtd, qfedtd;
      fedtd.p = 1.0;
      fedtd.bits = 0;
      qfedtd.p = 0.6;
      qfedtd.bits = 4;
      spec.sweep.variants = {fedtd, qfedtd};
      spec.sweep.N = {1, 40};
      break;
    }
    case FigureId::Fig2:
      spec.sweep.p = {0.3, 0.6, 0.9};
      break;
    case FigureId::Fig3:
      spec.sweep.bits = {3, 4, 5};
      break;
    case FigureId::Speedup:
      spec.base.T = 20'000;
      spec.base.step_size = StepSizeSchedule::constant(0.05);
      spec.base.erasure = ErasureSpec::with_success_probability(1.0);
      spec.bits = 0;
      spec.sweep.N = {1, 5, 10, 20, 40};
      spec.csv_stride = 50;
      break;
  }
  return spec;
}

bool FigureOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

double reach_time(const std::vector<double>& curve, double threshold) {
  const auto t = time_to_threshold(curve, threshold);
  return t ? static_cast<double>(*t) : kNever;
}

std::string fmt(const char* format, double a, double b) {
  char buf[200];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

// Points sorted by one coordinate.
template <typename Key>
std::vector<std::size_t> order_by(const SweepResult& r, Key key) {
  std::vector<std::size_t> idx(r.points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return key(r.points[a]) < key(r.points[b]); });
  return idx;
}

std::vector<FigureCheck> fig1_checks(const SweepResult& r, const std::vector<double>& plateaus) {
  std::vector<FigureCheck> checks;
  for (bool fed : {false, true}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      if (is_fedtd(r.points[i]) == fed) group.push_back(i);
    }
    if (group.size() < 2) continue;
    auto lo = *std::min_element(group.begin(), group.end(),
                                [&](auto a, auto b) { return r.points[a].N < r.points[b].N; });
    auto hi = *std::max_element(group.begin(), group.end(),
                                [&](auto a, auto b) { return r.points[a].N < r.points[b].N; });
    const double ratio = plateaus[hi] / plateaus[lo];
    // QFedTD carries the quantitative claim; FedTD only needs the ordering.
    const double limit = fed ? 1.0 : 0.5;
    checks.push_back({std::string(fed ? "fedtd" : "qfedtd") + "_more_agents_lower_plateau",
                      fed ? ratio < limit : ratio <= limit,
                      "N=" + std::to_string(r.points[hi].N) + " / N=" +
                          std::to_string(r.points[lo].N) + fmt(" plateau ratio %.4g (limit %.3g)",
                                                               ratio, limit)});
  }
  // Erasures slow convergence: compare each QFedTD curve with the FedTD curve
  // at the same N against a threshold both eventually reach.
  for (std::size_t q = 0; q < r.points.size(); ++q) {
    if (is_fedtd(r.points[q]) || r.points[q].p >= 1.0) continue;
    for (std::size_t f = 0; f < r.points.size(); ++f) {
      if (!is_fedtd(r.points[f]) || r.points[f].N != r.points[q].N) continue;
      const double threshold = 2.0 * std::max(plateaus[q], plateaus[f]);
      const double tq = reach_time(r.mean(q), threshold);
      const double tf = reach_time(r.mean(f), threshold);
      checks.push_back({"erasures_delay_threshold_N" + std::to_string(r.points[q].N),
                        tf < tq && tq < kNever,
                        fmt("threshold %.4g: erasure run reaches it at k=%g", threshold, tq) +
                            fmt(", FedTD at k=%g (plateau %.4g)", tf, plateaus[f])});
    }
  }
  return checks;
}

std::vector<FigureCheck> fig2_checks(const SweepResult& r, const std::vector<double>& plateaus) {
  const auto idx = order_by(r, [](const SweepPoint& p) { return p.p; });
  const double max_plateau = *std::max_element(plateaus.begin(), plateaus.end());
  const double min_plateau = *std::min_element(plateaus.begin(), plateaus.end());
  const double threshold = 2.0 * max_plateau;
  std::vector<double> times;
  std::string detail = fmt("threshold %.4g (2 x max plateau %.4g), times", threshold, max_plateau);
  bool decreasing = true;
  for (std::size_t n = 0; n < idx.size(); ++n) {
    times.push_back(reach_time(r.mean(idx[n]), threshold));
    detail += fmt(" p=%g:k=%g", r.points[idx[n]].p, times.back());
    if (n > 0 && !(times[n] < times[n - 1])) decreasing = false;
  }
  if (times.back() == kNever) decreasing = false;
  const double spread = max_plateau / min_plateau;
  return {
      {"time_to_threshold_decreasing_in_p", decreasing, detail},
      {"plateaus_within_factor_1.5", spread <= 1.5, fmt("max/min plateau %.4g (limit %.3g)", spread, 1.5)},
  };
}

std::vector<FigureCheck> fig3_checks(const SweepResult& r, const std::vector<double>& plateaus) {
  const auto idx = order_by(r, [](const SweepPoint& p) { return p.bits; });
  bool non_increasing = true;
  std::string detail = "plateaus";
  for (std::size_t n = 0; n < idx.size(); ++n) {
    detail += fmt(" b=%g:%.6g", r.points[idx[n]].bits, plateaus[idx[n]]);
    if (n > 0 && plateaus[idx[n]] > plateaus[idx[n - 1]]) non_increasing = false;
  }
  const bool strict = plateaus[idx.back()] < plateaus[idx.front()];
  return {
      {"plateau_non_increasing_in_bits", non_increasing, detail},
      {"plateau_strictly_lower_at_most_bits", strict,
       fmt("fewest bits %.6g, most bits %.6g", plateaus[idx.front()], plateaus[idx.back()])},
  };
}

std::vector<FigureCheck> speedup_checks(const SweepResult& r, const std::vector<double>& plateaus) {
  std::vector<std::pair<std::size_t, double>> pairs;
  for (std::size_t i = 0; i < r.points.size(); ++i) pairs.emplace_back(r.points[i].N, plateaus[i]);
  const double slope = speedup_regression(pairs);
  return {{"plateau_slope_vs_N", slope >= -1.2 && slope <= -0.8,
           fmt("log-log slope %.4f (accepted range [%g, -0.8])", slope, -1.2)}};
}

}  // namespace

std::vector<FigureCheck> figure_checks(FigureId id, const SweepResult& result,
                                       const std::vector<double>& plateaus) {
  if (result.points.empty()) throw Error(ErrorKind::InvalidArgument, "empty sweep");
  switch (id) {
    case FigureId::Fig1: return fig1_checks(result, plateaus);
    case FigureId::Fig2: return fig2_checks(result, plateaus);
    case FigureId::Fig3: return fig3_checks(result, plateaus);
    case FigureId::Speedup: return speedup_checks(result, plateaus);
  }
  return {};
}

FigureOutcome run_figure(FigureId id, const ExperimentSpec& spec, const Model& model,
                         const OracleBundle& oracle, std::size_t threads) {
  FigureOutcome out{id, spec, {}, {}, {}};
  out.result = run_sweep(spec, expand_grid(spec), model, oracle, threads);
  for (std::size_t i = 0; i < out.result.points.size(); ++i) {
    out.plateaus.push_back(plateau(out.result.mean(i)));
  }
  out.checks = figure_checks(id, out.result, out.plateaus);
  for (const auto& c : out.checks) {
    spdlog::info("{} {}: {} ({})", figure_name(id), c.name, c.passed ? "PASS" : "FAIL", c.detail);
  }
  return out;
}

json to_json(const FigureOutcome& outcome) {
  json points = json::array();
  for (std::size_t i = 0; i < outcome.result.points.size(); ++i) {
    const auto& pt = outcome.result.points[i];
    points.push_back({{"run_id", i},
                      {"N", pt.N},
                      {"p", pt.p},
                      {"bits", pt.bits},
                      {"alpha", outcome.result.alphas[i]},
                      {"plateau", outcome.plateaus[i]}});
  }
  json checks = json::array();
  for (const auto& c : outcome.checks) {
    checks.push_back({{"check", c.name}, {"status", c.passed ? "PASS" : "FAIL"}, {"detail", c.detail}});
  }
  return {{"figure", figure_name(outcome.id)}, {"points", points}, {"checks", checks}};
}

}  // namespace qfedtd
