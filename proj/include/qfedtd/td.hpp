#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "qfedtd/mrp.hpp"

namespace qfedtd {

struct Observation {
  std::size_t s = 0;
  double r = 0.0;
  std::size_t s_next = 0;
};

/// One agent's position in its own continuing chain. Transition randomness
/// for step k comes from the stream addressed by (master_seed, agent_id, k),
/// so agents never share draws and stepping order does not matter.
struct AgentState {
  std::size_t agent_id = 0;
  std::size_t current_state = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t steps_taken = 0;
};

/// N agents all parked at the common initial state `s0`.
std::vector<AgentState> make_agents(std::size_t count, std::size_t s0,
                                    std::uint64_t master_seed);

namespace detail {

/// Left-to-right dot product of a strided row with theta. Every TD
/// computation funnels through this so results are bitwise reproducible.
inline double row_dot(const double* row, std::ptrdiff_t stride, const double* theta,
                      std::size_t m) noexcept {
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) acc += row[static_cast<std::ptrdiff_t>(j) * stride] * theta[j];
  return acc;
}

}  // namespace detail

/// Temporal-difference error r + gamma <phi'_{s'}, theta> - <phi'_s, theta>.
double td_error(const Vector& theta, const Observation& obs, const FeatureMatrix& phi,
                double gamma);

/// g = td_error * phi'_s. Throws DimMismatch when theta has the wrong length.
Vector td_direction(const Vector& theta, const Observation& obs, const FeatureMatrix& phi,
                    double gamma);

/// Exact expectation of td_direction under s ~ pi, s' ~ P(s, .):
///   Phi^T D (R + gamma P Phi theta - Phi theta).
Vector steady_state_direction(const Vector& theta, const OracleBundle& oracle,
                              const Mrp& mrp, const FeatureMatrix& phi);

/// Samples s' from the agent's current row; reward is R[s].
std::pair<AgentState, Observation> step_agent(const AgentState& agent, const Mrp& mrp,
                                              const TransitionSampler& sampler);
std::pair<AgentState, Observation> step_agent(const AgentState& agent, const Mrp& mrp);

/// Noiseless recursion theta <- theta + alpha * gbar(theta). Returns
/// |theta_k - theta*|^2 for k = 0..steps. Throws Divergence above 1e12.
std::vector<double> mean_path_recursion(const Vector& theta0, double alpha, std::size_t steps,
                                        const OracleBundle& oracle, const Mrp& mrp,
                                        const FeatureMatrix& phi);

/// max_s TV(e_s^T M, pi) for a row-stochastic M.
double max_tv_distance(const Matrix& M, const Vector& pi);

/// Smallest k with max_s TV(e_s^T P^k, pi) <= epsilon, by dense powering.
/// Chain-level stand-in for the TD-direction mixing time. Throws
/// MixingNotReached past 1e6 steps.
std::size_t estimate_mixing_time(const Mrp& mrp, const Vector& pi, double epsilon);

/// State-visitation frequencies of one simulated trajectory.
Vector empirical_visitation(const Mrp& mrp, std::size_t s0, std::size_t steps,
                            std::uint64_t seed);

}  // namespace qfedtd
