#include <atomic>
#include <cmath>
#include <cstdlib>
#include <gtest/gtest.h>
#include <sstream>

#include "qfedtd/config.hpp"
#include "qfedtd/error.hpp"
#include "qfedtd/experiments.hpp"
#include "qfedtd/parallel.hpp"
#include "qfedtd/plot.hpp"
#include "qfedtd/verify.hpp"

using namespace qfedtd;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no exception";
  return ErrorKind::IoError;
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.name = "small";
  spec.model = {8, 3, 0.5, 2, ""};
  spec.base.N = 4;
  spec.base.T = 60;
  spec.base.step_size = StepSizeSchedule::constant(0.3);
  spec.base.erasure = ErasureSpec::with_success_probability(0.7);
  spec.bits = 3;
  spec.seeds = 5;
  spec.sweep.N = {1, 4};
  spec.sweep.bits = {0, 3};
  return spec;
}

}  // namespace

// =============================================================================
// TOML subset
// =============================================================================

TEST(Toml, ScalarsTablesAndArrays) {
  const auto doc = parse_toml(R"(# experiment
name = "demo"   # trailing comment
seeds = 1_000
flag = true
neg = -3
rate = 6e-1

[run]
alpha = 0.5
[model.extra]
values = [
  1, 2.5,  # inside an array
  -3,
]
[[variant]]
p = 1.0
[[variant]]
bits = 4
)");
  EXPECT_EQ(doc["name"], "demo");
  EXPECT_EQ(doc["seeds"], 1000);
  EXPECT_EQ(doc["flag"], true);
  EXPECT_EQ(doc["neg"], -3);
  EXPECT_DOUBLE_EQ(doc["rate"].get<double>(), 0.6);
  EXPECT_DOUBLE_EQ(doc["run"]["alpha"].get<double>(), 0.5);
  ASSERT_EQ(doc["model"]["extra"]["values"].size(), 3u);
  EXPECT_DOUBLE_EQ(doc["model"]["extra"]["values"][1].get<double>(), 2.5);
  ASSERT_EQ(doc["variant"].size(), 2u);
  EXPECT_EQ(doc["variant"][1]["bits"], 4);
}

TEST(Toml, ErrorsNameTheLine) {
  try {
    parse_toml("a = 1\nb = 2\na = 3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([] { parse_toml("a = \"open\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse_toml("a = 1x\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse_toml("a = 1 2\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse_toml("[t\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { load_toml("/nonexistent/config.toml"); }), ErrorKind::ConfigError);
}

// =============================================================================
// ExperimentSpec
// =============================================================================

TEST(ExperimentSpec, ReadsEveryField) {
  const auto spec = experiment_from_json(parse_toml(R"(
name = "grid"
seeds = 3
output_dir = "out"
csv_stride = 2
[model]
n = 12
m = 4
gamma = 0.7
seed = 9
[run]
N = 8
T = 200
alpha = 0.2
p = 0.5
bits = 5
scaling = "linf"
master_seed = 11
s0 = 2
normalize_by_survivors = true
theta0 = [0, 0, 1, 0]
[sweep]
N = [1, 8]
alpha = [0.1, 0.2]
)"));
  EXPECT_EQ(spec.name, "grid");
  EXPECT_EQ(spec.seeds, 3u);
  EXPECT_EQ(spec.csv_stride, 2u);
  EXPECT_EQ(spec.model.n, 12u);
  EXPECT_DOUBLE_EQ(spec.model.gamma, 0.7);
  EXPECT_EQ(spec.base.T, 200u);
  EXPECT_DOUBLE_EQ(spec.base.step_size.alpha, 0.2);
  EXPECT_DOUBLE_EQ(spec.base.erasure.p, 0.5);
  EXPECT_EQ(spec.bits, 5);
  EXPECT_EQ(spec.scaling, QuantizerScaling::LInf);
  EXPECT_EQ(spec.base.master_seed, 11u);
  EXPECT_EQ(spec.base.s0, 2u);
  EXPECT_TRUE(spec.base.normalize_by_survivors);
  EXPECT_EQ(spec.base.theta0.size(), 4);
  EXPECT_EQ(expand_grid(spec).size(), 4u);
}

TEST(ExperimentSpec, RejectsBadInput) {
  auto bad = [](const std::string& text) {
    return kind_of([&] { experiment_from_json(parse_toml(text)); });
  };
  EXPECT_EQ(bad("seed = 1\n"), ErrorKind::ConfigError);  // typo of seeds
  EXPECT_EQ(bad("seeds = 0\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[run]\np = 0\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[run]\nbits = 40\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[run]\nalpha = -1\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[run]\nN = \"four\"\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[run]\nalpha = 0.1\nstep_size = \"corollary\"\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[sweep]\np = []\n"), ErrorKind::ConfigError);
  EXPECT_EQ(bad("[sweep]\nN = [1, 0]\n"), ErrorKind::ConfigError);
}

TEST(ExperimentSpec, CorollarySchedule) {
  const auto spec = experiment_from_json(parse_toml("[run]\nstep_size = \"corollary\"\n"));
  EXPECT_EQ(spec.base.step_size.kind, StepSizeSchedule::Kind::Corollary);
}

TEST(ExpandGrid, VariantsCrossedWithAxes) {
  const auto spec = figure_spec(FigureId::Fig1);
  const auto points = expand_grid(spec);
  ASSERT_EQ(points.size(), 4u);
  EXPECT_EQ(points[0].N, 1u);
  EXPECT_EQ(points[0].bits, 0);
  EXPECT_EQ(points[0].p, 1.0);
  EXPECT_EQ(points[1].N, 40u);
  EXPECT_EQ(points[1].bits, 0);
  EXPECT_EQ(points[2].N, 1u);
  EXPECT_EQ(points[2].bits, 4);
  EXPECT_EQ(points[2].p, 0.6);
  EXPECT_EQ(points[3].N, 40u);
}

TEST(ExpandGrid, LaterAxesVaryFastest) {
  const auto points = expand_grid(small_spec());
  ASSERT_EQ(points.size(), 4u);
  EXPECT_EQ(points[0].N, 1u);
  EXPECT_EQ(points[0].bits, 0);
  EXPECT_EQ(points[1].N, 1u);
  EXPECT_EQ(points[1].bits, 3);
  EXPECT_EQ(points[2].N, 4u);
  EXPECT_EQ(points[2].bits, 0);
}

// =============================================================================
// Sweeps and CSV
// =============================================================================

TEST(Sweep, CsvSchemaOrderingAndRoundTrip) {
  const auto spec = small_spec();
  const auto model = load_experiment_model(spec.model);
  const auto oracle = build_oracles(model);
  const auto result = run_sweep(spec, expand_grid(spec), model, oracle, 1);
  const std::string csv = to_csv(result);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "run_id,seed,k,N,p,bits,alpha,delta_sq");
  std::size_t rows = 0;
  std::tuple<long, long, long> prev{-1, -1, -1};
  while (std::getline(in, line)) {
    long run, seed, k;
    std::size_t N;
    double p, alpha, d;
    int bits;
    ASSERT_EQ(std::sscanf(line.c_str(), "%ld,%ld,%ld,%zu,%lf,%d,%lf,%lf", &run, &seed, &k, &N, &p,
                          &bits, &alpha, &d),
              8);
    const std::tuple<long, long, long> key{run, seed, k};
    ASSERT_LT(prev, key);
    prev = key;
    // %.17g round-trips exactly.
    ASSERT_EQ(d, result.curves[run][seed - static_cast<long>(spec.base.master_seed)][k]);
    ++rows;
  }
  EXPECT_EQ(rows, 4u * 5u * 61u);
}

TEST(Sweep, StrideKeepsFinalIteration) {
  auto spec = small_spec();
  spec.seeds = 1;
  const auto model = load_experiment_model(spec.model);
  const auto oracle = build_oracles(model);
  const auto result = run_sweep(spec, {base_point(spec)}, model, oracle, 1);
  const std::string csv = to_csv(result, 25);
  EXPECT_NE(csv.find("\n0,0,50,"), std::string::npos);
  EXPECT_NE(csv.find("\n0,0,60,"), std::string::npos);
  EXPECT_EQ(csv.find("\n0,0,51,"), std::string::npos);
}

TEST(Sweep, ThreadCountDoesNotChangeOutput) {
  auto spec = small_spec();
  spec.seeds = 7;
  const auto model = load_experiment_model(spec.model);
  const auto oracle = build_oracles(model);
  const auto points = expand_grid(spec);
  const auto one = to_csv(run_sweep(spec, points, model, oracle, 1));
  const auto many = to_csv(run_sweep(spec, points, model, oracle, 4));
  EXPECT_EQ(one, many);
}

TEST(Sweep, SeedsAreConsecutiveFromMaster) {
  auto spec = small_spec();
  spec.base.master_seed = 100;
  spec.seeds = 2;
  const auto model = load_experiment_model(spec.model);
  const auto oracle = build_oracles(model);
  const auto result = run_sweep(spec, {base_point(spec)}, model, oracle, 1);
  RunConfig cfg = make_run_config(spec, base_point(spec), model.features.m());
  cfg.master_seed = 101;
  EXPECT_EQ(result.curves[0][1], run_qfedtd(cfg, model, oracle).delta_sq);
}

TEST(Sweep, DivergenceNamesTheConfiguration) {
  auto spec = small_spec();
  spec.sweep.alpha = {0.3, 400.0};
  const auto model = load_experiment_model(spec.model);
  const auto oracle = build_oracles(model);
  try {
    run_sweep(spec, expand_grid(spec), model, oracle, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    EXPECT_NE(std::string(e.what()).find("alpha=400"), std::string::npos) << e.what();
  }
}

// =============================================================================
// Plotting
// =============================================================================

TEST(Plot, ReadsMeansBackFromCsv) {
  const std::string csv =
      "run_id,seed,k,N,p,bits,alpha,delta_sq\n"
      "0,5,0,1,1,0,0.5,4\n0,5,1,1,1,0,0.5,2\n0,6,0,1,1,0,0.5,2\n0,6,1,1,1,0,0.5,1\n"
      "1,5,0,40,0.6,4,0.5,8\n1,5,1,40,0.6,4,0.5,0.5\n";
  const auto series = read_sweep_csv(csv);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].seeds, 2u);
  EXPECT_EQ(series[0].mean, (std::vector<double>{3.0, 1.5}));
  EXPECT_EQ(series_label(series[0], false), "FedTD, N=1");
  EXPECT_EQ(series_label(series[1], false), "QFedTD, N=40, p=0.6, 4 bits");
  const auto svg = render_svg(series, "demo");
  EXPECT_EQ(svg, render_svg_from_csv(csv, "demo"));
  EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
  EXPECT_NE(svg.find("FedTD, N=1"), std::string::npos);
  EXPECT_NE(svg.find(">1e-1<"), std::string::npos);  // log axis decade label
}

TEST(Plot, RejectsMalformedCsv) {
  EXPECT_EQ(kind_of([] { read_sweep_csv(""); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { read_sweep_csv("a,b\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { read_sweep_csv("run_id,seed,k,N,p,bits,alpha,delta_sq\n0,1,2\n"); }),
            ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] {
              read_sweep_csv("run_id,seed,k,N,p,bits,alpha,delta_sq\n0,1,0,1,1,0,0.1,x\n");
            }),
            ErrorKind::ConfigError);
}

// =============================================================================
// Figure checks
// =============================================================================

TEST(FigureChecks, Fig2DetectsMisorderedTimes) {
  SweepResult r;
  r.seeds = 1;
  r.alphas = {0.6, 0.6, 0.6};
  for (double p : {0.3, 0.6, 0.9}) r.points.push_back({40, p, 4, 0.6});
  // Decay rates deliberately not ordered by p.
  for (double rate : {0.9, 0.5, 0.7}) {
    std::vector<double> c;
    for (int k = 0; k < 100; ++k) c.push_back(std::pow(rate, k) + 0.01);
    r.curves.push_back({c});
  }
  std::vector<double> plateaus;
  for (std::size_t i = 0; i < 3; ++i) plateaus.push_back(plateau(r.mean(i)));
  const auto checks = figure_checks(FigureId::Fig2, r, plateaus);
  EXPECT_FALSE(checks[0].passed);
  EXPECT_TRUE(checks[1].passed);
}

TEST(FigureChecks, Fig3AndSpeedup) {
  SweepResult r;
  r.seeds = 1;
  for (int b : {3, 4, 5}) r.points.push_back({40, 0.6, b, 0.6});
  EXPECT_TRUE(figure_checks(FigureId::Fig3, r, {3.0, 2.0, 2.0})[0].passed);
  EXPECT_FALSE(figure_checks(FigureId::Fig3, r, {2.0, 2.0, 2.0})[1].passed);
  EXPECT_FALSE(figure_checks(FigureId::Fig3, r, {2.0, 2.5, 1.0})[0].passed);

  SweepResult s;
  std::vector<double> pl;
  for (std::size_t N : {1u, 5u, 10u, 20u, 40u}) {
    s.points.push_back({N, 1.0, 0, 0.05});
    pl.push_back(0.07 / static_cast<double>(N));
  }
  EXPECT_TRUE(figure_checks(FigureId::Speedup, s, pl)[0].passed);
  for (auto& v : pl) v = 0.07;
  EXPECT_FALSE(figure_checks(FigureId::Speedup, s, pl)[0].passed);
}

TEST(FigureSpec, DefaultsFollowTheExperimentDesign) {
  for (auto id : {FigureId::Fig1, FigureId::Fig2, FigureId::Fig3}) {
    const auto spec = figure_spec(id);
    EXPECT_EQ(spec.model.n, 20u);
    EXPECT_EQ(spec.model.m, 10u);
    EXPECT_EQ(spec.model.gamma, 0.5);
    EXPECT_EQ(spec.base.step_size.alpha, 0.6);
    EXPECT_EQ(spec.seeds, 32u);
    EXPECT_EQ(spec.base.N, 40u);
  }
  EXPECT_EQ(expand_grid(figure_spec(FigureId::Fig2)).size(), 3u);
  EXPECT_EQ(expand_grid(figure_spec(FigureId::Fig3)).size(), 3u);
  EXPECT_EQ(figure_from_name("fig3"), FigureId::Fig3);
  EXPECT_FALSE(figure_from_name("fig4").has_value());
}

// =============================================================================
// Thread pool
// =============================================================================

TEST(Parallel, ThreadCountResolution) {
  ::unsetenv("QFEDTD_THREADS");
  EXPECT_EQ(resolve_thread_count(0), 1u);
  ::setenv("QFEDTD_THREADS", "3", 1);
  EXPECT_EQ(resolve_thread_count(0), 3u);
  EXPECT_EQ(resolve_thread_count(5), 5u);
  ::setenv("QFEDTD_THREADS", "many", 1);
  EXPECT_EQ(resolve_thread_count(0), 1u);
  ::unsetenv("QFEDTD_THREADS");
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(50, 3,
                            [](std::size_t i) {
                              if (i == 17) throw Error(ErrorKind::InvalidArgument, "boom");
                            }),
               Error);
}

// =============================================================================
// Shipped configuration files
// =============================================================================

TEST(ShippedConfigs, FigureFilesMatchBuiltInDesigns) {
  for (auto id : {FigureId::Fig1, FigureId::Fig2, FigureId::Fig3, FigureId::Speedup}) {
    const auto name = figure_name(id);
    const auto loaded = load_experiment(std::string(QFEDTD_SOURCE_DIR) + "/configs/" + name + ".toml");
    const auto builtin = figure_spec(id);
    const auto a = expand_grid(loaded), b = expand_grid(builtin);
    ASSERT_EQ(a.size(), b.size()) << name;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].N, b[i].N);
      EXPECT_EQ(a[i].p, b[i].p);
      EXPECT_EQ(a[i].bits, b[i].bits);
    }
    EXPECT_EQ(loaded.base.T, builtin.base.T) << name;
    EXPECT_EQ(loaded.base.step_size.alpha, builtin.base.step_size.alpha) << name;
    EXPECT_EQ(loaded.seeds, builtin.seeds) << name;
    EXPECT_EQ(loaded.csv_stride, builtin.csv_stride) << name;
  }
}

TEST(ShippedConfigs, AllParse) {
  for (const char* name : {"reference", "corollary"}) {
    EXPECT_NO_THROW(load_experiment(std::string(QFEDTD_SOURCE_DIR) + "/configs/" + name + ".toml"))
        << name;
  }
}
