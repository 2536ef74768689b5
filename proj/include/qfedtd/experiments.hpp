#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfedtd/federation.hpp"
#include "qfedtd/mrp.hpp"

namespace qfedtd {

/// Where the experiment's model comes from: a JSON file, or the synthetic
/// generator with the given shape and seed.
struct ModelSource {
  std::size_t n = 20;
  std::size_t m = 10;
  double gamma = 0.5;
  std::uint64_t seed = 7;
  std::string path;  // non-empty: load from JSON instead
};

/// One point of the sweep. bits == 0 means the identity quantizer.
struct SweepPoint {
  std::size_t N = 1;
  double p = 1.0;
  int bits = 0;
  std::optional<double> alpha;  // unset: use the base schedule
};

/// Partial override applied before the grid; lets a sweep pair settings
/// that are not a full cartesian product (e.g. FedTD vs QFedTD).
struct Variant {
  std::optional<std::size_t> N;
  std::optional<double> p;
  std::optional<int> bits;
  std::optional<double> alpha;
};

struct SweepGrid {
  std::vector<Variant> variants;  // empty behaves as one empty variant
  std::vector<std::size_t> N;
  std::vector<double> p;
  std::vector<int> bits;
  std::vector<double> alpha;
};

struct ExperimentSpec {
  std::string name = "experiment";
  ModelSource model;
  RunConfig base;  // base.quantizer is rebuilt from `bits` once m is known
  int bits = 0;
  QuantizerScaling scaling = QuantizerScaling::L2;
  SweepGrid sweep;
  std::size_t seeds = 32;
  std::string output_dir = ".";
  std::size_t csv_stride = 1;
};

/// Reads an ExperimentSpec from parsed TOML. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
ExperimentSpec experiment_from_json(const nlohmann::json& doc);
ExperimentSpec load_experiment(const std::string& path);

/// Throws ConfigError unless seeds >= 1, csv_stride >= 1 and every grid
/// value is in range.
void validate_experiment(const ExperimentSpec& spec);

Model load_experiment_model(const ModelSource& source);

/// Variants in order, each crossed with N x p x bits x alpha (nested in that
/// order, later axes fastest). The index of a point is its run_id.
std::vector<SweepPoint> expand_grid(const ExperimentSpec& spec);

/// The base point alone (what `run` executes).
SweepPoint base_point(const ExperimentSpec& spec);

RunConfig make_run_config(const ExperimentSpec& spec, const SweepPoint& point, std::size_t m);

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<double> alphas;  // resolved step size per point
  std::uint64_t master_seed = 0;
  std::size_t seeds = 0;
  // curves[point][j] is the trajectory for master seed master_seed + j.
  std::vector<std::vector<std::vector<double>>> curves;

  std::vector<double> mean(std::size_t point) const;
};

/// Runs every (point, seed) pair, in parallel across pairs. The output does
/// not depend on `threads`. A diverging run is reported with its point and
/// seed.
SweepResult run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points,
                      const Model& model, const OracleBundle& oracle, std::size_t threads);

/// CSV with header run_id,seed,k,N,p,bits,alpha,delta_sq, sorted by
/// (run_id, seed, k). Rows with k % stride != 0 are skipped except k = T.
std::string to_csv(const SweepResult& result, std::size_t stride = 1);

// ---------------------------------------------------------------------------
// Figure experiments
// ---------------------------------------------------------------------------

enum class FigureId { Fig1, Fig2, Fig3, Speedup };

std::optional<FigureId> figure_from_name(const std::string& name);
std::string figure_name(FigureId id);

/// Default design of each experiment: n=20, m=10, gamma=0.5 model, N=40,
/// alpha=0.6, 32 seeds. Speedup uses the identity quantizer, p=1,
/// alpha=0.05, T=2e4 over N in {1,5,10,20,40}.
ExperimentSpec figure_spec(FigureId id);

struct FigureCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct FigureOutcome {
  FigureId id;
  ExperimentSpec spec;
  SweepResult result;
  std::vector<double> plateaus;  // per point
  std::vector<FigureCheck> checks;

  bool passed() const;
};

/// Runs the sweep and evaluates the qualitative orderings of the figure.
FigureOutcome run_figure(FigureId id, const ExperimentSpec& spec, const Model& model,
                         const OracleBundle& oracle, std::size_t threads);

/// The ordering checks alone, given a finished sweep.
std::vector<FigureCheck> figure_checks(FigureId id, const SweepResult& result,
                                       const std::vector<double>& plateaus);

nlohmann::json to_json(const FigureOutcome& outcome);

}  // namespace qfedtd
