#include "qfedtd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "qfedtd/error.hpp"
#include "qfedtd/parallel.hpp"
#include "qfedtd/random.hpp"
#include "qfedtd/td.hpp"

namespace qfedtd {

namespace {

constexpr double kSlackTolerance = -1e-9;

enum PropertyStream : std::uint64_t {
  kLemma1 = 1,
  kLipschitz = 2,
  kNormBound = 3,
  kVisitation = 4,
  kQuantizer = 5,
};

// Random parameter vector with a log-uniform overall scale in [1e-2, 1e1].
Vector random_theta(std::size_t m, RandomStream& stream, std::normal_distribution<double>& normal) {
  const double scale = std::pow(10.0, -2.0 + 3.0 * stream.uniform());
  Vector theta(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = scale * normal(stream);
  return theta;
}

Observation random_observation(const Mrp& mrp, const TransitionSampler& sampler,
                               RandomStream& stream) {
  const auto s = std::min(mrp.n() - 1, static_cast<std::size_t>(stream.uniform() *
                                                                static_cast<double>(mrp.n())));
  return Observation{s, mrp.R(static_cast<Eigen::Index>(s)), sampler.next(s, stream.uniform())};
}

PropertyResult finish(std::string name, double worst, std::size_t trials) {
  return PropertyResult{std::move(name), worst >= kSlackTolerance, worst, trials};
}

}  // namespace

BoundTerms theorem_bound_terms(const BoundInputs& in) {
  if (static_cast<double>(in.T) < 2.0 * static_cast<double>(in.tau)) {
    throw Error(ErrorKind::HorizonTooShort, "T = " + std::to_string(in.T) + " < 2 tau = " +
                                                std::to_string(2 * in.tau));
  }
  if (!(in.alpha > 0 && in.omega > 0 && in.gamma >= 0 && in.gamma < 1 && in.p > 0 &&
        in.sigma_noise > 0 && in.zeta_prime > 0 && in.N > 0)) {
    throw Error(ErrorKind::InvalidArgument, "bound inputs must be strictly positive");
  }
  const double contraction_rate = in.alpha * in.omega * (1.0 - in.gamma) * in.p;
  const double T = static_cast<double>(in.T);
  const double rho_pow_T = contraction_rate < 1.0 ? std::exp(T * std::log1p(-contraction_rate))
                                                  : std::pow(1.0 - contraction_rate, T);
  const double sigma_sq = in.sigma_noise * in.sigma_noise;
  const double C1 = TheoremConstants::C1(in.delta0_sq, in.p, in.sigma_noise);

  BoundTerms terms;
  terms.contraction = rho_pow_T * C1;
  terms.variance = static_cast<double>(in.tau) * sigma_sq / (in.omega * (1.0 - in.gamma)) *
                   (in.constants.C2 * in.alpha * in.zeta_prime / static_cast<double>(in.N) +
                    in.constants.C3 * std::pow(in.alpha, in.constants.q + 1));
  return terms;
}

double theorem_bound(const BoundInputs& in) { return theorem_bound_terms(in).total(); }

BoundInputs make_bound_inputs(const RunConfig& cfg, const Model& model,
                              const OracleBundle& oracle, const TheoremConstants& constants) {
  BoundInputs in;
  in.alpha = resolve_step_size(cfg, model, oracle);
  in.omega = oracle.omega;
  in.gamma = model.mrp.gamma;
  in.p = cfg.erasure.p;
  in.tau = estimate_mixing_time(model.mrp, oracle.pi, std::pow(in.alpha, constants.q));
  in.sigma_noise = oracle.sigma_noise;
  in.zeta_prime = cfg.quantizer.zeta_prime();
  const Vector theta0 = cfg.theta0.size() == 0
                            ? Vector::Zero(static_cast<Eigen::Index>(model.features.m()))
                            : cfg.theta0;
  in.delta0_sq = (theta0 - oracle.theta_star).squaredNorm();
  in.N = cfg.N;
  in.T = cfg.T;
  in.constants = constants;
  return in;
}

CompliantStepSize theorem_compliant_step_size(const Model& model, const OracleBundle& oracle,
                                              double zeta_prime,
                                              const TheoremConstants& constants) {
  std::size_t tau = 1;
  double alpha = step_size_ceiling(oracle.omega, model.mrp.gamma, tau, zeta_prime, constants);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t needed =
        std::max<std::size_t>(1, estimate_mixing_time(model.mrp, oracle.pi,
                                                      std::pow(alpha, constants.q)));
    if (needed <= tau) return {alpha, tau};
    tau = needed;
    alpha = step_size_ceiling(oracle.omega, model.mrp.gamma, tau, zeta_prime, constants);
  }
  throw Error(ErrorKind::MixingNotReached, "step-size ceiling iteration did not settle");
}

EnvelopeReport verify_bound_envelope(const RunConfig& cfg, const Model& model,
                                     const OracleBundle& oracle, std::size_t seeds,
                                     std::size_t threads, const TheoremConstants& constants) {
  if (seeds == 0) throw Error(ErrorKind::InvalidArgument, "need at least one seed");
  EnvelopeReport report;
  report.inputs = make_bound_inputs(cfg, model, oracle, constants);
  report.bound = theorem_bound(report.inputs);
  const double ceiling = step_size_ceiling(oracle.omega, model.mrp.gamma, report.inputs.tau,
                                           report.inputs.zeta_prime, constants);
  report.asserted = report.inputs.alpha <= ceiling;
  report.seeds = seeds;

  std::vector<double> finals(seeds);
  parallel_for(seeds, threads, [&](std::size_t j) {
    RunConfig replica = cfg;
    replica.master_seed = cfg.master_seed + j;
    finals[j] = run_qfedtd(replica, model, oracle).delta_sq.back();
  });
  double sum = 0.0;
  for (double v : finals) sum += v;
  report.mean_final_delta_sq = sum / static_cast<double>(seeds);
  report.slack_factor = report.mean_final_delta_sq > 0.0
                            ? report.bound / report.mean_final_delta_sq
                            : std::numeric_limits<double>::infinity();
  report.passed = report.mean_final_delta_sq <= report.bound;
  return report;
}

nlohmann::json to_json(const EnvelopeReport& report) {
  return {
      {"property", "bound_envelope"},
      {"status", report.passed ? "PASS" : (report.asserted ? "FAIL" : "ADVISORY")},
      {"worst_slack", report.bound - report.mean_final_delta_sq},
      {"trials", report.seeds},
      {"bound", report.bound},
      {"mean_final_delta_sq", report.mean_final_delta_sq},
      {"slack_factor", report.slack_factor},
      {"alpha", report.inputs.alpha},
      {"tau", report.inputs.tau},
      {"asserted", report.asserted},
  };
}

std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  std::vector<double> mean(curves.front().size(), 0.0);
  for (const auto& curve : curves) {
    if (curve.size() != mean.size()) {
      throw Error(ErrorKind::DimMismatch, "curves have different lengths");
    }
    for (std::size_t k = 0; k < curve.size(); ++k) mean[k] += curve[k];
  }
  for (double& v : mean) v /= static_cast<double>(curves.size());
  return mean;
}

double plateau(const std::vector<double>& curve) {
  if (curve.empty()) throw Error(ErrorKind::InvalidArgument, "empty curve");
  const std::size_t tail = std::max<std::size_t>(1, curve.size() / 10);
  double sum = 0.0;
  for (std::size_t k = curve.size() - tail; k < curve.size(); ++k) sum += curve[k];
  return sum / static_cast<double>(tail);
}

std::optional<std::size_t> time_to_threshold(const std::vector<double>& curve, double threshold) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k] <= threshold) return k;
  }
  return std::nullopt;
}

double speedup_regression(const std::vector<std::pair<std::size_t, double>>& plateaus) {
  std::set<std::size_t> distinct;
  for (const auto& [n, value] : plateaus) {
    if (n == 0 || !(value > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "agent counts and plateaus must be positive");
    }
    distinct.insert(n);
  }
  if (distinct.size() < 4) {
    throw Error(ErrorKind::InsufficientPoints, "need at least four distinct agent counts");
  }
  double mx = 0, my = 0;
  for (const auto& [n, value] : plateaus) {
    mx += std::log(static_cast<double>(n));
    my += std::log(value);
  }
  const double count = static_cast<double>(plateaus.size());
  mx /= count;
  my /= count;
  double sxy = 0, sxx = 0;
  for (const auto& [n, value] : plateaus) {
    const double dx = std::log(static_cast<double>(n)) - mx;
    sxy += dx * (std::log(value) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

bool PropertyReport::all_passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

const PropertyResult* PropertyReport::find(const std::string& property) const {
  for (const auto& r : results) {
    if (r.property == property) return &r;
  }
  return nullptr;
}

nlohmann::json to_json(const PropertyReport& report) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : report.results) {
    out.push_back({{"property", r.property},
                   {"status", r.passed ? "PASS" : "FAIL"},
                   {"worst_slack", r.worst_slack},
                   {"trials", r.trials}});
  }
  return out;
}

QuantizerCheck check_quantizer(const QuantizerSpec& spec, const Vector& x, std::size_t draws,
                               std::uint64_t seed) {
  if (draws < 2) throw Error(ErrorKind::InvalidArgument, "need at least two draws");
  const auto m = x.size();
  RandomStream stream(seed, StreamPurpose::PropertyTrials, kQuantizer);
  Vector sum = Vector::Zero(m);
  Vector sum_sq = Vector::Zero(m);
  double distortion = 0.0;
  Vector q(m);
  for (std::size_t d = 0; d < draws; ++d) {
    q = x;
    quantize_in_place(spec, q, stream);
    // Centre on x so the per-component variance is computed without
    // catastrophic cancellation.
    const Vector err = q - x;
    sum += err;
    sum_sq += err.cwiseProduct(err);
    distortion += err.squaredNorm();
  }
  const double count = static_cast<double>(draws);
  QuantizerCheck check;
  check.unbiased_slack = std::numeric_limits<double>::infinity();
  const double rounding = 1e-12 * x.norm();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double mean_err = sum(j) / count;
    const double var = std::max(0.0, (sum_sq(j) - count * mean_err * mean_err) / (count - 1.0));
    const double se = std::sqrt(var / count);
    check.unbiased_slack = std::min(check.unbiased_slack, 4.0 * se + rounding - std::abs(mean_err));
  }
  const double norm_sq = x.squaredNorm();
  check.distortion_ratio = norm_sq > 0.0 ? distortion / count / norm_sq : 0.0;
  check.distortion_slack = spec.zeta - check.distortion_ratio;
  return check;
}

PropertyReport run_property_suite(const Model& model, const OracleBundle& oracle,
                                  std::size_t trials, const PropertySuiteOptions& options) {
  if (trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  const auto& mrp = model.mrp;
  const auto& phi = model.features;
  const std::size_t m = phi.m();
  const double gamma = mrp.gamma;
  const TransitionSampler sampler(mrp.P);
  const DirectionFn gbar = options.steady_direction
                               ? options.steady_direction
                               : DirectionFn([&](const Vector& theta) {
                                   return steady_state_direction(theta, oracle, mrp, phi);
                                 });
  std::normal_distribution<double> normal(0.0, 1.0);
  PropertyReport report;

  {
    const double slack = 1e-9 - gbar(oracle.theta_star).norm();
    report.results.push_back(PropertyResult{"fixed_point_residual", slack >= 0.0, slack, 1});
  }

  {
    RandomStream stream(options.seed, StreamPurpose::PropertyTrials, kLemma1);
    double worst = std::numeric_limits<double>::infinity();
    const double contraction = oracle.omega * (1.0 - gamma);
    for (std::size_t t = 0; t < trials; ++t) {
      const Vector theta = oracle.theta_star + random_theta(m, stream, normal);
      const Vector gap = oracle.theta_star - theta;
      worst = std::min(worst, gap.dot(gbar(theta)) - contraction * gap.squaredNorm());
    }
    report.results.push_back(finish("lemma1_monotonicity", worst, trials));
  }

  {
    RandomStream stream(options.seed, StreamPurpose::PropertyTrials, kLipschitz);
    double worst_sampled = std::numeric_limits<double>::infinity();
    double worst_steady = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const Vector a = random_theta(m, stream, normal);
      const Vector b = random_theta(m, stream, normal);
      const Observation obs = random_observation(mrp, sampler, stream);
      const double allowed = 2.0 * (a - b).norm();
      worst_sampled = std::min(
          worst_sampled,
          allowed - (td_direction(a, obs, phi, gamma) - td_direction(b, obs, phi, gamma)).norm());
      worst_steady = std::min(worst_steady, allowed - (gbar(a) - gbar(b)).norm());
    }
    report.results.push_back(finish("lipschitz_sampled", worst_sampled, trials));
    report.results.push_back(finish("lipschitz_steady_state", worst_steady, trials));
  }

  {
    RandomStream stream(options.seed, StreamPurpose::PropertyTrials, kNormBound);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const Vector theta = random_theta(m, stream, normal);
      const Observation obs = random_observation(mrp, sampler, stream);
      worst = std::min(worst, 2.0 * theta.norm() + 2.0 * mrp.r_bar -
                                  td_direction(theta, obs, phi, gamma).norm());
    }
    report.results.push_back(finish("td_norm_bound", worst, trials));
  }

  if (options.visitation_steps > 0) {
    const Vector freq = empirical_visitation(mrp, 0, options.visitation_steps,
                                             options.seed ^ static_cast<std::uint64_t>(kVisitation));
    const double tv = 0.5 * (freq - oracle.pi).cwiseAbs().sum();
    report.results.push_back(finish("stationary_sampler", 0.01 - tv, options.visitation_steps));
  }

  {
    RandomStream stream(options.seed, StreamPurpose::PropertyTrials, kQuantizer);
    for (int bits : options.quantizer_bits) {
      const auto spec = QuantizerSpec::stochastic_uniform(bits, m);
      double worst_bias = std::numeric_limits<double>::infinity();
      double worst_distortion = std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < options.quantizer_vectors; ++v) {
        const Vector x = random_theta(m, stream, normal);
        const auto check = check_quantizer(spec, x, options.quantizer_draws, stream());
        worst_bias = std::min(worst_bias, check.unbiased_slack);
        worst_distortion = std::min(worst_distortion, check.distortion_slack);
      }
      const auto trials_q = options.quantizer_vectors * options.quantizer_draws;
      auto bias = finish("quantizer_unbiased_b" + std::to_string(bits), worst_bias, trials_q);
      bias.passed = worst_bias >= 0.0;
      report.results.push_back(std::move(bias));
      report.results.push_back(
          finish("quantizer_distortion_b" + std::to_string(bits), worst_distortion, trials_q));
    }
  }
  return report;
}

}  // namespace qfedtd
