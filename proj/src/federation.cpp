#include "qfedtd/federation.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "qfedtd/error.hpp"
#include "qfedtd/random.hpp"

namespace qfedtd {

namespace {

constexpr double kThetaDivergence = 1e9;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-run scratch space shared by qfedtd_step and run_qfedtd so that both
// perform the exact same floating-point operations.
class RoundKernel {
 public:
  RoundKernel(const RunConfig& cfg, const Model& model)
      : cfg_(cfg),
        model_(model),
        sampler_(model.mrp.P),
        features_(model.features.Phi),
        direction_(static_cast<Eigen::Index>(model.features.m())),
        sum_(static_cast<Eigen::Index>(model.features.m())) {}

  // Adds b_i * Q(g_i) for agent i into the running sum.
  void accumulate(const Vector& theta, const Observation& obs, std::size_t agent,
                  std::uint64_t iteration, const Vector* expected) {
    const std::size_t m = model_.features.m();
    if (expected != nullptr) {
      direction_ = *expected;
    } else {
      const double* s_row = features_.data() + obs.s * m;
      const double* next_row = features_.data() + obs.s_next * m;
      const double delta = obs.r + model_.mrp.gamma * detail::row_dot(next_row, 1, theta.data(), m) -
                           detail::row_dot(s_row, 1, theta.data(), m);
      for (std::size_t j = 0; j < m; ++j) direction_[static_cast<Eigen::Index>(j)] = delta * s_row[j];
    }
    RandomStream stream(cfg_.master_seed, StreamPurpose::Quantizer, agent, iteration);
    quantize_in_place(cfg_.quantizer, direction_, stream);
    for (std::size_t j = 0; j < m; ++j) {
      sum_[static_cast<Eigen::Index>(j)] += direction_[static_cast<Eigen::Index>(j)];
    }
  }

  void reset() { sum_.setZero(); }

  // theta <- theta + alpha * sum / divisor.
  void apply(Vector& theta, double alpha, std::size_t survivors) const {
    const double divisor = cfg_.normalize_by_survivors
                               ? static_cast<double>(std::max<std::size_t>(survivors, 1))
                               : static_cast<double>(cfg_.N);
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += alpha * (sum_[j] / divisor);
    const double norm = theta.norm();
    if (!(norm <= kThetaDivergence)) {
      throw Error(ErrorKind::Divergence, "|theta| = " + std::to_string(norm) +
                                             " exceeds 1e9 (step size " +
                                             std::to_string(alpha) + ")");
    }
  }

  const Vector& sum() const { return sum_; }
  const TransitionSampler& sampler() const { return sampler_; }

 private:
  const RunConfig& cfg_;
  const Model& model_;
  TransitionSampler sampler_;
  RowMajorMatrix features_;
  Vector direction_;
  Vector sum_;
};

double squared_distance(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

std::vector<bool> round_mask(const RunConfig& cfg, std::uint64_t iteration) {
  RandomStream stream(cfg.master_seed, StreamPurpose::Erasure, 0, iteration);
  return erasure_mask(cfg.erasure, cfg.N, stream);
}

StepResult advance(RoundKernel& kernel, const Vector& theta, std::vector<AgentState> agents,
                   const RunConfig& cfg, double alpha, std::uint64_t iteration,
                   const Model& model, const OracleBundle& oracle,
                   const StepOverrides& overrides) {
  if (agents.size() != cfg.N) {
    throw Error(ErrorKind::DimMismatch, "agent list size differs from N");
  }
  std::vector<bool> mask = overrides.forced_mask ? *overrides.forced_mask
                                                 : round_mask(cfg, iteration);
  if (mask.size() != cfg.N) throw Error(ErrorKind::DimMismatch, "mask size differs from N");

  std::optional<Vector> expected;
  if (overrides.use_expected_direction) {
    expected = steady_state_direction(theta, oracle, model.mrp, model.features);
  }

  kernel.reset();
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < cfg.N; ++i) {
    auto [next, obs] = step_agent(agents[i], model.mrp, kernel.sampler());
    agents[i] = next;
    if (!mask[i]) continue;
    ++survivors;
    kernel.accumulate(theta, obs, i, iteration, expected ? &*expected : nullptr);
  }
  StepResult result{theta, std::move(agents), survivors};
  kernel.apply(result.theta, alpha, survivors);
  return result;
}

}  // namespace

void validate_config(const RunConfig& cfg, const Model& model) {
  if (cfg.N == 0) throw Error(ErrorKind::InvalidArgument, "N must be >= 1");
  if (cfg.T == 0) throw Error(ErrorKind::InvalidArgument, "T must be >= 1");
  if (cfg.step_size.kind == StepSizeSchedule::Kind::Constant && !(cfg.step_size.alpha > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "step size must be positive");
  }
  if (!(cfg.erasure.p > 0.0 && cfg.erasure.p <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "success probability must lie in (0, 1]");
  }
  if (cfg.s0 >= model.mrp.n()) throw Error(ErrorKind::InvalidArgument, "s0 outside state space");
  if (cfg.theta0.size() != 0 &&
      static_cast<std::size_t>(cfg.theta0.size()) != model.features.m()) {
    throw Error(ErrorKind::DimMismatch, "theta0 length differs from m");
  }
}

double corollary_schedule(std::size_t N, std::size_t T, double omega, double gamma, double p) {
  const double nt = static_cast<double>(N) * static_cast<double>(T);
  if (nt < std::exp(1.0)) {
    spdlog::warn("corollary step size: NT = {} is below e, log(NT) < 1", nt);
  }
  return std::log(nt) / (omega * (1.0 - gamma) * p * static_cast<double>(T));
}

double corollary_horizon_floor(std::size_t N, std::size_t T, std::size_t tau, double zeta_prime,
                               double omega, double gamma, double p,
                               const TheoremConstants& constants) {
  const double nt = static_cast<double>(N) * static_cast<double>(T);
  const double contraction = omega * (1.0 - gamma);
  return 2.0 * constants.C0 * static_cast<double>(N) * static_cast<double>(tau) * zeta_prime *
         std::log(nt) / (contraction * contraction * p);
}

double resolve_step_size(const RunConfig& cfg, const Model& model, const OracleBundle& oracle) {
  if (cfg.step_size.kind == StepSizeSchedule::Kind::Constant) return cfg.step_size.alpha;
  return corollary_schedule(cfg.N, cfg.T, oracle.omega, model.mrp.gamma, cfg.erasure.p);
}

double step_size_ceiling(double omega, double gamma, std::size_t tau, double zeta_prime,
                         const TheoremConstants& constants) {
  return omega * (1.0 - gamma) /
         (constants.C0 * static_cast<double>(std::max<std::size_t>(tau, 1)) * zeta_prime);
}

StepSizeReport check_step_size(const RunConfig& cfg, const Model& model,
                               const OracleBundle& oracle, const TheoremConstants& constants) {
  StepSizeReport report;
  report.alpha = resolve_step_size(cfg, model, oracle);
  report.zeta_prime = cfg.quantizer.zeta_prime();
  const double epsilon = std::pow(report.alpha, constants.q);
  report.tau = estimate_mixing_time(model.mrp, oracle.pi, epsilon);
  report.ceiling =
      step_size_ceiling(oracle.omega, model.mrp.gamma, report.tau, report.zeta_prime, constants);
  report.within_ceiling = report.alpha <= report.ceiling;

  spdlog::info("run setup: N={} T={} alpha={} p={} zeta={} zeta'={} payload={} bits/agent/round",
               cfg.N, cfg.T, report.alpha, cfg.erasure.p, cfg.quantizer.zeta, report.zeta_prime,
               cfg.quantizer.payload_bits(model.features.m()));
  if (cfg.step_size.kind == StepSizeSchedule::Kind::Constant && !report.within_ceiling) {
    spdlog::warn("alpha = {} exceeds the bound's ceiling omega(1-gamma)/(C0 tau zeta') = {} "
                 "(tau = {}); the finite-time bound does not apply",
                 report.alpha, report.ceiling, report.tau);
  }
  if (cfg.step_size.kind == StepSizeSchedule::Kind::Corollary) {
    const double floor = corollary_horizon_floor(cfg.N, cfg.T, report.tau, report.zeta_prime,
                                                 oracle.omega, model.mrp.gamma, cfg.erasure.p,
                                                 constants);
    if (static_cast<double>(cfg.T) < floor) {
      spdlog::warn("T = {} is below the corollary horizon floor {}", cfg.T, floor);
    }
  }
  return report;
}

Vector aggregate_directions(const Vector& theta, const std::vector<Observation>& observations,
                            const std::vector<bool>& mask, const RunConfig& cfg,
                            std::uint64_t iteration, const Model& model) {
  if (observations.size() != cfg.N || mask.size() != cfg.N) {
    throw Error(ErrorKind::DimMismatch, "observations and mask must have N entries");
  }
  if (static_cast<std::size_t>(theta.size()) != model.features.m()) {
    throw Error(ErrorKind::DimMismatch, "theta length differs from m");
  }
  RoundKernel kernel(cfg, model);
  kernel.reset();
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < cfg.N; ++i) {
    if (!mask[i]) continue;
    ++survivors;
    kernel.accumulate(theta, observations[i], i, iteration, nullptr);
  }
  const double divisor = cfg.normalize_by_survivors
                             ? static_cast<double>(std::max<std::size_t>(survivors, 1))
                             : static_cast<double>(cfg.N);
  return kernel.sum() / divisor;
}

StepResult qfedtd_step(const Vector& theta, std::vector<AgentState> agents,
                       const RunConfig& cfg, double alpha, std::uint64_t iteration,
                       const Model& model, const OracleBundle& oracle,
                       const StepOverrides& overrides) {
  if (static_cast<std::size_t>(theta.size()) != model.features.m()) {
    throw Error(ErrorKind::DimMismatch, "theta length differs from m");
  }
  RoundKernel kernel(cfg, model);
  return advance(kernel, theta, std::move(agents), cfg, alpha, iteration, model, oracle,
                 overrides);
}

Trajectory run_qfedtd(const RunConfig& cfg, const Model& model, const OracleBundle& oracle) {
  validate_config(cfg, model);
  Trajectory out;
  out.alpha = resolve_step_size(cfg, model, oracle);
  out.delta_sq.reserve(cfg.T + 1);

  Vector theta = cfg.theta0.size() == 0
                     ? Vector::Zero(static_cast<Eigen::Index>(model.features.m()))
                     : cfg.theta0;
  auto agents = make_agents(cfg.N, cfg.s0, cfg.master_seed);
  RoundKernel kernel(cfg, model);
  out.delta_sq.push_back(squared_distance(theta, oracle.theta_star));
  for (std::uint64_t k = 0; k < cfg.T; ++k) {
    auto step = advance(kernel, theta, std::move(agents), cfg, out.alpha, k, model, oracle, {});
    theta = std::move(step.theta);
    agents = std::move(step.agents);
    out.delta_sq.push_back(squared_distance(theta, oracle.theta_star));
  }
  return out;
}

}  // namespace qfedtd
