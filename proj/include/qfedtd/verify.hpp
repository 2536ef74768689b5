#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qfedtd/federation.hpp"
#include "qfedtd/mrp.hpp"

namespace qfedtd {

// ---------------------------------------------------------------------------
// Finite-time bound
// ---------------------------------------------------------------------------

/// Every symbol of the bound
///   E[delta_T^2] <= rho^T C1 + tau sigma^2 / (omega (1-gamma))
///                              * (C2 alpha zeta' / N + C3 alpha^(q+1)),
/// with rho = 1 - alpha omega (1-gamma) p and C1 = 4 delta0^2 + 2 p sigma^2.
struct BoundInputs {
  double alpha = 0;
  double omega = 0;
  double gamma = 0;
  double p = 1;
  std::size_t tau = 0;
  double sigma_noise = 1;
  double zeta_prime = 1;
  double delta0_sq = 0;
  std::size_t N = 1;
  std::size_t T = 1;
  TheoremConstants constants;
};

struct BoundTerms {
  double contraction = 0;  // rho^T C1
  double variance = 0;     // the tau sigma^2 term
  double total() const noexcept { return contraction + variance; }
};

/// Throws HorizonTooShort when T < 2 tau.
BoundTerms theorem_bound_terms(const BoundInputs& in);
double theorem_bound(const BoundInputs& in);

/// Collects the bound inputs for a run; tau is the chain mixing time at
/// epsilon = alpha^q.
BoundInputs make_bound_inputs(const RunConfig& cfg, const Model& model,
                              const OracleBundle& oracle, const TheoremConstants& constants = {});

struct CompliantStepSize {
  double alpha = 0;
  std::size_t tau = 0;
};

/// Largest alpha with alpha = omega (1-gamma) / (C0 tau(alpha^q) zeta'),
/// found by iterating the ceiling until tau stops changing.
CompliantStepSize theorem_compliant_step_size(const Model& model, const OracleBundle& oracle,
                                              double zeta_prime,
                                              const TheoremConstants& constants = {});

struct EnvelopeReport {
  BoundInputs inputs;
  double mean_final_delta_sq = 0;
  double bound = 0;
  double slack_factor = 0;  // bound / mean
  bool asserted = false;    // alpha within the ceiling, so a violation is a failure
  bool passed = false;
  std::size_t seeds = 0;
};

/// Runs `seeds` independent replicas (master seeds cfg.master_seed + j) and
/// compares the mean final error against the bound. One-sided sanity check.
EnvelopeReport verify_bound_envelope(const RunConfig& cfg, const Model& model,
                                     const OracleBundle& oracle, std::size_t seeds,
                                     std::size_t threads = 1,
                                     const TheoremConstants& constants = {});

nlohmann::json to_json(const EnvelopeReport& report);

// ---------------------------------------------------------------------------
// Curve statistics
// ---------------------------------------------------------------------------

/// Pointwise mean of equally long curves.
std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves);

/// Mean over the last 10% of the points (at least one).
double plateau(const std::vector<double>& curve);

/// First index whose value is <= threshold.
std::optional<std::size_t> time_to_threshold(const std::vector<double>& curve, double threshold);

/// Least-squares slope of log(plateau) against log(N). Throws
/// InsufficientPoints with fewer than four distinct N values.
double speedup_regression(const std::vector<std::pair<std::size_t, double>>& plateaus);

// ---------------------------------------------------------------------------
// Inequality suite
// ---------------------------------------------------------------------------

struct PropertyResult {
  std::string property;
  bool passed = false;
  double worst_slack = 0;  // min over trials of (allowed - observed); >= tolerance passes
  std::size_t trials = 0;
};

struct PropertyReport {
  std::vector<PropertyResult> results;

  bool all_passed() const;
  const PropertyResult* find(const std::string& property) const;
};

nlohmann::json to_json(const PropertyReport& report);

using DirectionFn = std::function<Vector(const Vector&)>;

struct PropertySuiteOptions {
  std::uint64_t seed = 2024;
  // Replaces the exact steady-state direction (mutation testing).
  DirectionFn steady_direction;
  std::vector<int> quantizer_bits{3, 4, 5};
  std::size_t quantizer_vectors = 10;
  std::size_t quantizer_draws = 20'000;
  std::size_t visitation_steps = 1'000'000;
};

/// Checks, over `trials` random draws each:
///   fixed_point_residual     |gbar(theta*)| <= 1e-9
///   lemma1_monotonicity      <theta* - theta, gbar(theta)> >= omega (1-gamma) |theta* - theta|^2
///   lipschitz_sampled        |g(theta) - g(theta')| <= 2 |theta - theta'|
///   lipschitz_steady_state   |gbar(theta) - gbar(theta')| <= 2 |theta - theta'|
///   td_norm_bound            |g(theta)| <= 2 |theta| + 2 r_bar
///   stationary_sampler       TV(visitation, pi) <= 0.01
///   quantizer_unbiased_b*    |mean Q(x) - x| <= 4 standard errors per component
///   quantizer_distortion_b*  mean |Q(x) - x|^2 / |x|^2 <= zeta
/// Inequalities pass with slack >= -1e-9.
PropertyReport run_property_suite(const Model& model, const OracleBundle& oracle,
                                  std::size_t trials, const PropertySuiteOptions& options = {});

/// Monte-Carlo check of Definition-style quantizer contract for one spec and
/// vector. Returns {worst unbiasedness slack in units of x, distortion slack}.
struct QuantizerCheck {
  double unbiased_slack = 0;     // min_j (4 SE_j - |mean_j - x_j|)
  double distortion_ratio = 0;   // mean |Q(x)-x|^2 / |x|^2
  double distortion_slack = 0;   // zeta - ratio
};
QuantizerCheck check_quantizer(const QuantizerSpec& spec, const Vector& x, std::size_t draws,
                               std::uint64_t seed);

}  // namespace qfedtd
