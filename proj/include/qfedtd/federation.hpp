#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qfedtd/comms.hpp"
#include "qfedtd/mrp.hpp"
#include "qfedtd/td.hpp"

namespace qfedtd {

/// Constants of the finite-time bound, with q the mixing precision exponent
/// (epsilon = alpha^q).
struct TheoremConstants {
  double C0 = 6446.0;
  double C2 = 5162.0;
  double C3 = 61.0;
  int q = 2;

  /// C1 = 4 delta0^2 + 2 p sigma^2.
  static double C1(double delta0_sq, double p, double sigma) noexcept {
    return 4.0 * delta0_sq + 2.0 * p * sigma * sigma;
  }
};

struct StepSizeSchedule {
  enum class Kind { Constant, Corollary };
  Kind kind = Kind::Constant;
  double alpha = 0.05;  // used by Constant only

  static StepSizeSchedule constant(double alpha) { return {Kind::Constant, alpha}; }
  static StepSizeSchedule corollary() { return {Kind::Corollary, 0.0}; }
};

struct RunConfig {
  std::size_t N = 1;
  std::size_t T = 1000;
  StepSizeSchedule step_size;
  QuantizerSpec quantizer;
  ErasureSpec erasure;
  Vector theta0;  // empty means the zero vector
  std::uint64_t master_seed = 0;
  std::size_t s0 = 0;
  // Exploration only: divide by the number of survivors instead of N.
  bool normalize_by_survivors = false;
};

/// Throws InvalidArgument for N == 0, T == 0, alpha <= 0, or a bad s0/theta0.
void validate_config(const RunConfig& cfg, const Model& model);

/// log(NT) / (omega (1 - gamma) p T). Logs a warning when NT < e.
double corollary_schedule(std::size_t N, std::size_t T, double omega, double gamma, double p);

/// 2 C0 N tau zeta' log(NT) / (omega^2 (1 - gamma)^2 p): the horizon below
/// which the corollary step size is not covered by the bound.
double corollary_horizon_floor(std::size_t N, std::size_t T, std::size_t tau, double zeta_prime,
                               double omega, double gamma, double p,
                               const TheoremConstants& constants = {});

/// Step size the run will use.
double resolve_step_size(const RunConfig& cfg, const Model& model, const OracleBundle& oracle);

/// omega (1 - gamma) / (C0 tau zeta').
double step_size_ceiling(double omega, double gamma, std::size_t tau, double zeta_prime,
                         const TheoremConstants& constants = {});

struct StepSizeReport {
  double alpha = 0;
  double ceiling = 0;
  std::size_t tau = 0;  // chain mixing time at epsilon = alpha^q
  double zeta_prime = 1;
  bool within_ceiling = false;
};

/// Computes the ceiling for the configured step size and logs zeta', the
/// payload size, and a warning when alpha exceeds the ceiling.
StepSizeReport check_step_size(const RunConfig& cfg, const Model& model,
                               const OracleBundle& oracle,
                               const TheoremConstants& constants = {});

/// Test hooks for a single server round.
struct StepOverrides {
  std::optional<std::vector<bool>> forced_mask;
  // Replace each sampled g_i by the exact steady-state direction.
  bool use_expected_direction = false;
};

struct StepResult {
  Vector theta;
  std::vector<AgentState> agents;
  std::size_t survivors = 0;
};

/// Server aggregate (1/N) sum_i b_i Q(g_i(theta)) for given observations and
/// mask. Quantizer randomness for agent i at round k comes from the stream
/// (master_seed, Quantizer, i, k).
Vector aggregate_directions(const Vector& theta, const std::vector<Observation>& observations,
                            const std::vector<bool>& mask, const RunConfig& cfg,
                            std::uint64_t iteration, const Model& model);

/// One round: every agent steps its chain and computes its TD direction; the
/// direction is quantized, erased with probability 1 - p, and the server
/// applies theta + alpha * (1/N) sum_i b_i h_i. Erasure bits for round k come
/// from the stream (master_seed, Erasure, 0, k).
/// Throws Divergence when |theta| exceeds 1e9.
StepResult qfedtd_step(const Vector& theta, std::vector<AgentState> agents,
                       const RunConfig& cfg, double alpha, std::uint64_t iteration,
                       const Model& model, const OracleBundle& oracle,
                       const StepOverrides& overrides = {});

struct Trajectory {
  double alpha = 0;
  std::vector<double> delta_sq;  // |theta_k - theta*|^2 for k = 0..T
};

/// T rounds from theta0 with all agents at s0. Deterministic in master_seed.
Trajectory run_qfedtd(const RunConfig& cfg, const Model& model, const OracleBundle& oracle);

}  // namespace qfedtd
