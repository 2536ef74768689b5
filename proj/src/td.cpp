#include "qfedtd/td.hpp"

#include <cmath>

#include "qfedtd/error.hpp"
#include "qfedtd/random.hpp"

namespace qfedtd {

namespace {

constexpr double kDivergenceThreshold = 1e12;
constexpr std::size_t kMixingCap = 1'000'000;

void check_theta(const Vector& theta, const FeatureMatrix& phi) {
  if (static_cast<std::size_t>(theta.size()) != phi.m()) {
    throw Error(ErrorKind::DimMismatch, "theta has length " + std::to_string(theta.size()) +
                                            ", features have m = " + std::to_string(phi.m()));
  }
}

}  // namespace

std::vector<AgentState> make_agents(std::size_t count, std::size_t s0,
                                    std::uint64_t master_seed) {
  std::vector<AgentState> agents(count);
  for (std::size_t i = 0; i < count; ++i) agents[i] = AgentState{i, s0, master_seed, 0};
  return agents;
}

double td_error(const Vector& theta, const Observation& obs, const FeatureMatrix& phi,
                double gamma) {
  check_theta(theta, phi);
  const auto n = phi.Phi.rows();
  const double* base = phi.Phi.data();
  const auto s = static_cast<std::ptrdiff_t>(obs.s);
  const auto s_next = static_cast<std::ptrdiff_t>(obs.s_next);
  if (obs.s >= phi.n() || obs.s_next >= phi.n()) {
    throw Error(ErrorKind::DimMismatch, "observation state outside the feature table");
  }
  const double next_value = detail::row_dot(base + s_next, n, theta.data(), phi.m());
  const double value = detail::row_dot(base + s, n, theta.data(), phi.m());
  return obs.r + gamma * next_value - value;
}

Vector td_direction(const Vector& theta, const Observation& obs, const FeatureMatrix& phi,
                    double gamma) {
  const double delta = td_error(theta, obs, phi, gamma);
  return delta * phi.Phi.row(static_cast<Eigen::Index>(obs.s)).transpose();
}

Vector steady_state_direction(const Vector& theta, const OracleBundle& oracle,
                              const Mrp& mrp, const FeatureMatrix& phi) {
  check_theta(theta, phi);
  const Vector values = phi.Phi * theta;
  const Vector residual = mrp.R + mrp.gamma * (mrp.P * values) - values;
  return phi.Phi.transpose() * oracle.pi.cwiseProduct(residual);
}

std::pair<AgentState, Observation> step_agent(const AgentState& agent, const Mrp& mrp,
                                              const TransitionSampler& sampler) {
  RandomStream stream(agent.master_seed, StreamPurpose::Transition, agent.agent_id,
                      agent.steps_taken);
  const std::size_t s = agent.current_state;
  const std::size_t s_next = sampler.next(s, stream.uniform());
  AgentState next = agent;
  next.current_state = s_next;
  ++next.steps_taken;
  return {next, Observation{s, mrp.R(static_cast<Eigen::Index>(s)), s_next}};
}

std::pair<AgentState, Observation> step_agent(const AgentState& agent, const Mrp& mrp) {
  return step_agent(agent, mrp, TransitionSampler(mrp.P));
}

std::vector<double> mean_path_recursion(const Vector& theta0, double alpha, std::size_t steps,
                                        const OracleBundle& oracle, const Mrp& mrp,
                                        const FeatureMatrix& phi) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "step size must be positive");
  check_theta(theta0, phi);
  std::vector<double> errors;
  errors.reserve(steps + 1);
  Vector theta = theta0;
  errors.push_back((theta - oracle.theta_star).squaredNorm());
  for (std::size_t k = 0; k < steps; ++k) {
    theta += alpha * steady_state_direction(theta, oracle, mrp, phi);
    const double err = (theta - oracle.theta_star).squaredNorm();
    if (!(err <= kDivergenceThreshold)) {
      throw Error(ErrorKind::Divergence, "mean path diverged at step " + std::to_string(k + 1));
    }
    errors.push_back(err);
  }
  return errors;
}

double max_tv_distance(const Matrix& M, const Vector& pi) {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < M.rows(); ++s) {
    worst = std::max(worst, 0.5 * (M.row(s).transpose() - pi).cwiseAbs().sum());
  }
  return worst;
}

std::size_t estimate_mixing_time(const Mrp& mrp, const Vector& pi, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  const auto n = mrp.P.rows();
  Matrix power = Matrix::Identity(n, n);
  // Below ~1e-12 the distance is dominated by rounding in the powers, so
  // smaller targets are reached by extrapolating the geometric decay
  // measured between 1e-6 and the floor.
  constexpr double kReferenceTv = 1e-6;
  constexpr double kFloorTv = 1e-12;
  std::size_t ref_k = 0;
  double ref_tv = -1.0;
  for (std::size_t k = 0; k <= kMixingCap; ++k) {
    const double tv = max_tv_distance(power, pi);
    if (tv <= epsilon) return k;
    if (ref_tv < 0.0 && tv <= kReferenceTv) {
      ref_k = k;
      ref_tv = tv;
    }
    if (tv <= kFloorTv && ref_tv > 0.0 && k > ref_k) {
      const double log_rate = std::log(tv / ref_tv) / static_cast<double>(k - ref_k);
      const double extra = std::ceil(std::log(epsilon / tv) / log_rate);
      if (static_cast<double>(k) + extra > static_cast<double>(kMixingCap)) break;
      return k + static_cast<std::size_t>(extra);
    }
    power = power * mrp.P;
  }
  throw Error(ErrorKind::MixingNotReached,
              "total variation above epsilon after " + std::to_string(kMixingCap) + " steps");
}

Vector empirical_visitation(const Mrp& mrp, std::size_t s0, std::size_t steps,
                            std::uint64_t seed) {
  const TransitionSampler sampler(mrp.P);
  Vector counts = Vector::Zero(mrp.P.rows());
  AgentState agent{0, s0, seed, 0};
  for (std::size_t k = 0; k < steps; ++k) {
    counts(static_cast<Eigen::Index>(agent.current_state)) += 1.0;
    agent = step_agent(agent, mrp, sampler).first;
  }
  return counts / static_cast<double>(steps);
}

}  // namespace qfedtd
