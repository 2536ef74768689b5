#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "qfedtd/error.hpp"
#include "qfedtd/experiments.hpp"
#include "qfedtd/io_util.hpp"
#include "qfedtd/parallel.hpp"
#include "qfedtd/plot.hpp"
#include "qfedtd/verify.hpp"

namespace qfedtd {

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 0;
  std::string format = "csv";
  std::string log_level = "info";
  std::size_t trials = 10'000;
  std::vector<std::string> figures;
  std::string csv_path;
};

ExperimentSpec spec_from(const Options& opt, ExperimentSpec fallback) {
  ExperimentSpec spec = opt.config.empty() ? std::move(fallback) : load_experiment(opt.config);
  if (opt.seed) spec.base.master_seed = *opt.seed;
  if (!opt.out.empty()) spec.output_dir = opt.out;
  return spec;
}

struct Prepared {
  Model model;
  OracleBundle oracle;
};

Prepared prepare(const ExperimentSpec& spec) {
  Model model = load_experiment_model(spec.model);
  OracleBundle oracle = build_oracles(model);
  spdlog::info("model: n={} m={} gamma={} omega={:.6g} |theta*|={:.6g}", model.mrp.n(),
               model.features.m(), model.mrp.gamma, oracle.omega, oracle.theta_star.norm());
  return {std::move(model), std::move(oracle)};
}

void write_csv_and_report(const ExperimentSpec& spec, const SweepResult& result) {
  const fs::path path = fs::path(spec.output_dir) / (spec.name + ".csv");
  write_file_atomically(path, to_csv(result, spec.csv_stride));
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& pt = result.points[i];
    std::printf("run_id=%zu N=%zu p=%g bits=%d alpha=%g plateau=%.6g\n", i, pt.N, pt.p, pt.bits,
                result.alphas[i], plateau(result.mean(i)));
  }
  std::printf("wrote %s\n", path.string().c_str());
}

int cmd_run(const Options& opt, bool sweep) {
  ExperimentSpec defaults;
  defaults.name = sweep ? "sweep" : "run";
  const auto spec = spec_from(opt, defaults);
  const auto prepared = prepare(spec);
  const auto points = sweep ? expand_grid(spec) : std::vector<SweepPoint>{base_point(spec)};
  const auto result = run_sweep(spec, points, prepared.model, prepared.oracle,
                                resolve_thread_count(opt.threads));
  write_csv_and_report(spec, result);
  return kOk;
}

int cmd_verify(const Options& opt) {
  ExperimentSpec defaults;
  defaults.name = "verify";
  const auto spec = spec_from(opt, defaults);
  const auto prepared = prepare(spec);
  const auto& model = prepared.model;
  const auto& oracle = prepared.oracle;

  PropertySuiteOptions suite_options;
  suite_options.seed = spec.base.master_seed ^ 0x5eedULL;
  const auto properties = run_property_suite(model, oracle, opt.trials, suite_options);

  RunConfig cfg = make_run_config(spec, base_point(spec), model.features.m());
  const auto compliant = theorem_compliant_step_size(model, oracle, cfg.quantizer.zeta_prime());
  cfg.step_size = StepSizeSchedule::constant(compliant.alpha);
  cfg.T = std::max(cfg.T, 2 * compliant.tau);
  const auto envelope = verify_bound_envelope(cfg, model, oracle, spec.seeds,
                                              resolve_thread_count(opt.threads));

  nlohmann::json report = {{"properties", to_json(properties)},
                           {"bound_envelope", to_json(envelope)}};
  for (const auto& r : properties.results) {
    std::printf("%-28s %s  worst_slack=%.6g trials=%zu\n", r.property.c_str(),
                r.passed ? "PASS" : "FAIL", r.worst_slack, r.trials);
  }
  std::printf("%-28s %s  mean=%.6g bound=%.6g alpha=%.6g tau=%zu\n", "bound_envelope",
              envelope.passed ? "PASS" : "FAIL", envelope.mean_final_delta_sq, envelope.bound,
              envelope.inputs.alpha, envelope.inputs.tau);
  if (!opt.out.empty()) {
    write_file_atomically(fs::path(opt.out) / "verify.json", report.dump(2) + "\n");
  }
  return properties.all_passed() && envelope.passed ? kOk : kFailed;
}

int cmd_figures(const Options& opt) {
  std::vector<FigureId> ids;
  auto names = opt.figures.empty() ? std::vector<std::string>{"all"} : opt.figures;
  for (const auto& name : names) {
    if (name == "all") {
      ids.insert(ids.end(), {FigureId::Fig1, FigureId::Fig2, FigureId::Fig3});
    } else if (auto id = figure_from_name(name)) {
      ids.push_back(*id);
    } else {
      throw Error(ErrorKind::ConfigError, "unknown figure '" + name + "'");
    }
  }
  if (!opt.config.empty() && ids.size() != 1) {
    throw Error(ErrorKind::ConfigError, "--config applies to a single figure");
  }
  bool all_passed = true;
  for (FigureId id : ids) {
    auto spec = spec_from(opt, figure_spec(id));
    const auto prepared = prepare(spec);
    const auto outcome = run_figure(id, spec, prepared.model, prepared.oracle,
                                    resolve_thread_count(opt.threads));
    const fs::path dir(spec.output_dir);
    const std::string csv = to_csv(outcome.result, spec.csv_stride);
    write_file_atomically(dir / (spec.name + ".csv"), csv);
    write_file_atomically(dir / (spec.name + ".svg"), render_svg_from_csv(csv, spec.name));
    write_file_atomically(dir / (spec.name + ".json"), to_json(outcome).dump(2) + "\n");
    for (const auto& c : outcome.checks) {
      std::printf("%s %-40s %s  %s\n", spec.name.c_str(), c.name.c_str(),
                  c.passed ? "PASS" : "FAIL", c.detail.c_str());
    }
    all_passed = all_passed && outcome.passed();
  }
  return all_passed ? kOk : kFailed;
}

int cmd_plot(const Options& opt) {
  const fs::path in(opt.csv_path);
  fs::path out = opt.out.empty() ? fs::path(in).replace_extension(".svg") : fs::path(opt.out);
  if (fs::is_directory(out)) out /= in.stem().string() + ".svg";
  write_file_atomically(out, render_svg_from_csv(read_file(in), in.stem().string()));
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Federated TD(0) with quantized uploads over erasure channels"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "Experiment file (TOML)");
  app.add_option("--seed", opt.seed, "Master seed override");
  app.add_option("--out", opt.out, "Output directory (plot: output file or directory)");
  app.add_option("--threads", opt.threads,
                 "Worker threads; affects speed only (default: QFEDTD_THREADS or 1)");
  app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv"}));
  app.add_option("--log-level", opt.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* run = app.add_subcommand("run", "Run the base configuration over all seeds");
  auto* sweep = app.add_subcommand("sweep", "Run the full parameter grid");
  auto* verify = app.add_subcommand("verify", "Inequality suite and finite-time bound check");
  verify->add_option("--trials", opt.trials, "Random trials per inequality")
      ->check(CLI::PositiveNumber);
  auto* figures = app.add_subcommand("figures", "Figure experiments with ordering checks");
  figures->add_option("which", opt.figures, "fig1, fig2, fig3, speedup or all (default)");
  auto* plot = app.add_subcommand("plot", "Render a sweep CSV as SVG");
  plot->add_option("csv", opt.csv_path, "Input CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  spdlog::set_level(spdlog::level::from_str(opt.log_level));
  try {
    if (run->parsed()) return cmd_run(opt, false);
    if (sweep->parsed()) return cmd_run(opt, true);
    if (verify->parsed()) return cmd_verify(opt);
    if (figures->parsed()) return cmd_figures(opt);
    if (plot->parsed()) return cmd_plot(opt);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kInvalid;
}

}  // namespace qfedtd
