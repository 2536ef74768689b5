#include <cmath>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qfedtd/error.hpp"
#include "qfedtd/verify.hpp"

using namespace qfedtd;

namespace {

BoundInputs sample_inputs() {
  BoundInputs in;
  in.alpha = 1e-3;
  in.omega = 0.4;
  in.gamma = 0.5;
  in.p = 0.6;
  in.tau = 12;
  in.sigma_noise = 2.0;
  in.zeta_prime = 1.3;
  in.delta0_sq = 5.0;
  in.N = 10;
  in.T = 20'000;
  return in;
}

double relative_gap(double value, const oracle::Big& reference) {
  return static_cast<double>(boost::multiprecision::abs((oracle::Big(value) - reference) / reference));
}

}  // namespace

// =============================================================================
// Finite-time bound
// =============================================================================

TEST(TheoremBound, HandComputedTerms) {
  const auto in = sample_inputs();
  const auto terms = theorem_bound_terms(in);
  const double rho = 1 - 1e-3 * 0.4 * 0.5 * 0.6;
  EXPECT_NEAR(terms.contraction / (std::pow(rho, 20000) * (4 * 5.0 + 2 * 0.6 * 4.0)), 1.0, 1e-12);
  const double variance = 12 * 4.0 / 0.2 * (5162 * 1e-3 * 1.3 / 10 + 61 * 1e-9);
  EXPECT_NEAR(terms.variance / variance, 1.0, 1e-14);
}

TEST(TheoremBound, SmallStepLimitIsInitialConstant) {
  auto in = sample_inputs();
  in.alpha = 1e-14;
  in.T = 100;
  EXPECT_NEAR(theorem_bound(in), 4 * 5.0 + 2 * 0.6 * 4.0, 1e-6);
}

TEST(TheoremBound, ZeroInitialGapKeepsNoiseTerm) {
  auto in = sample_inputs();
  in.delta0_sq = 0.0;
  const auto terms = theorem_bound_terms(in);
  const double rho_T = std::pow(1 - 1e-3 * 0.4 * 0.5 * 0.6, 20000);
  EXPECT_NEAR(terms.contraction, rho_T * 2 * 0.6 * 4.0, 1e-12);
}

TEST(TheoremBound, ShortHorizonRejected) {
  auto in = sample_inputs();
  in.T = 23;
  try {
    theorem_bound(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HorizonTooShort);
  }
  in.T = 24;
  EXPECT_NO_THROW(theorem_bound(in));
}

TEST(TheoremBound, AgreesWithMultiprecision) {
  for (double alpha : {1e-7, 1e-5, 1e-3, 0.05}) {
    for (std::size_t T : {100u, 10'000u, 1'000'000u}) {
      auto in = sample_inputs();
      in.alpha = alpha;
      in.T = T;
      const auto ref = oracle::bound_multiprecision(alpha, in.omega, in.gamma, in.p, in.tau,
                                                    in.sigma_noise, in.zeta_prime, in.delta0_sq,
                                                    in.N, T, 5162, 61, 2);
      EXPECT_LE(relative_gap(theorem_bound(in), ref), 1e-12) << alpha << " " << T;
    }
  }
}

TEST(TheoremBound, MonotoneInItsArguments) {
  const auto base = sample_inputs();
  const double b0 = theorem_bound(base);
  auto in = base;
  in.zeta_prime = 2.0;
  EXPECT_GT(theorem_bound(in), b0);
  in = base;
  in.N = 40;
  EXPECT_LT(theorem_bound(in), b0);
  // A larger step lowers the transient but raises the noise floor; at long
  // horizons the floor dominates.
  in = base;
  in.T = 10'000'000;
  const double long_run = theorem_bound(in);
  in.alpha *= 2;
  EXPECT_GT(theorem_bound(in), long_run);
  // Fewer successful uploads slow the contraction.
  in = base;
  in.delta0_sq = 1e6;
  const double reliable = theorem_bound(in);
  in.p = 0.3;
  EXPECT_GT(theorem_bound(in), reliable);
}

TEST(CompliantStepSize, IsAFixedPointOfTheCeiling) {
  const auto model = generate_synthetic(20, 10, 0.5, 7);
  const auto oracle = build_oracles(model);
  const auto c = theorem_compliant_step_size(model, oracle, 1.0);
  EXPECT_GT(c.alpha, 0.0);
  EXPECT_LE(estimate_mixing_time(model.mrp, oracle.pi, c.alpha * c.alpha), c.tau);
  EXPECT_DOUBLE_EQ(c.alpha, step_size_ceiling(oracle.omega, 0.5, c.tau, 1.0));
}

TEST(BoundEnvelope, CompliantRunsStayBelowTheBound) {
  const auto model = generate_synthetic(20, 10, 0.5, 7);
  const auto oracle = build_oracles(model);
  for (std::size_t N : {1u, 10u}) {
    for (double p : {1.0, 0.6}) {
      RunConfig cfg;
      cfg.N = N;
      cfg.T = 2000;
      cfg.quantizer = N == 1 ? QuantizerSpec::identity() : QuantizerSpec::stochastic_uniform(4, 10);
      cfg.erasure = ErasureSpec::with_success_probability(p);
      const auto c = theorem_compliant_step_size(model, oracle, cfg.quantizer.zeta_prime());
      cfg.step_size = StepSizeSchedule::constant(c.alpha);
      const auto report = verify_bound_envelope(cfg, model, oracle, 8, 2);
      EXPECT_TRUE(report.asserted);
      EXPECT_TRUE(report.passed) << report.mean_final_delta_sq << " vs " << report.bound;
      EXPECT_GT(report.slack_factor, 1.0);
      const auto j = to_json(report);
      EXPECT_TRUE(j.contains("bound"));
    }
  }
}

// =============================================================================
// Curve statistics
// =============================================================================

TEST(CurveStats, MeanPlateauAndThreshold) {
  const std::vector<std::vector<double>> curves{{4, 3, 2, 1, 1, 1, 1, 1, 1, 1},
                                                {2, 1, 2, 1, 1, 1, 1, 1, 1, 3}};
  const auto mean = mean_curve(curves);
  EXPECT_EQ(mean[0], 3.0);
  EXPECT_EQ(mean[9], 2.0);
  EXPECT_EQ(plateau(mean), 2.0);
  EXPECT_EQ(time_to_threshold(mean, 1.5), 3u);
  EXPECT_FALSE(time_to_threshold(mean, 0.5).has_value());
  EXPECT_THROW(mean_curve({{1, 2}, {1}}), Error);
}

TEST(CurveStats, SpeedupRegressionSlopes) {
  std::vector<std::pair<std::size_t, double>> inverse, flat;
  for (std::size_t N : {1u, 5u, 10u, 20u, 40u}) {
    inverse.emplace_back(N, 3.0 / static_cast<double>(N));
    flat.emplace_back(N, 0.7);
  }
  EXPECT_NEAR(speedup_regression(inverse), -1.0, 1e-12);
  EXPECT_NEAR(speedup_regression(flat), 0.0, 1e-12);
  try {
    speedup_regression({{1, 1.0}, {2, 0.5}, {4, 0.25}, {4, 0.2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientPoints);
  }
}

// =============================================================================
// Inequality suite
// =============================================================================

TEST(PropertySuite, PassesOnDefaultModel) {
  const auto model = generate_synthetic(20, 10, 0.5, 7);
  const auto oracle = build_oracles(model);
  const auto report = run_property_suite(model, oracle, 2000);
  for (const auto& r : report.results) EXPECT_TRUE(r.passed) << r.property << " " << r.worst_slack;
  EXPECT_TRUE(report.all_passed());
  ASSERT_NE(report.find("lemma1_monotonicity"), nullptr);
  const auto j = to_json(report);
  EXPECT_EQ(j.size(), report.results.size());
}

TEST(PropertySuite, SignFlipIsCaught) {
  const auto model = generate_synthetic(20, 10, 0.5, 7);
  const auto oracle = build_oracles(model);
  PropertySuiteOptions options;
  options.steady_direction = [&](const Vector& theta) -> Vector {
    return -steady_state_direction(theta, oracle, model.mrp, model.features);
  };
  options.visitation_steps = 0;
  options.quantizer_bits.clear();
  const auto report = run_property_suite(model, oracle, 200, options);
  EXPECT_FALSE(report.find("lemma1_monotonicity")->passed);
  EXPECT_FALSE(report.all_passed());
}

TEST(PropertySuite, LipschitzHoldsNearUnitDiscount) {
  const auto model = generate_synthetic(20, 10, 0.99, 11);
  const auto oracle = build_oracles(model);
  PropertySuiteOptions options;
  options.visitation_steps = 0;
  options.quantizer_bits.clear();
  const auto report = run_property_suite(model, oracle, 2000, options);
  EXPECT_TRUE(report.find("lipschitz_sampled")->passed);
  EXPECT_TRUE(report.find("lipschitz_steady_state")->passed);
  EXPECT_TRUE(report.find("td_norm_bound")->passed);
  EXPECT_TRUE(report.find("lemma1_monotonicity")->passed);
}
