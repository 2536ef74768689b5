#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qfedtd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Markov reward process induced by a fixed policy. Actions are not stored:
/// everything downstream depends only on the induced chain and rewards.
struct Mrp {
  Matrix P;  // row-stochastic, n x n
  Vector R;  // per-state reward
  double gamma = 0.5;
  double r_bar = 0.0;  // max_s |R[s]|

  std::size_t n() const noexcept { return static_cast<std::size_t>(P.rows()); }
};

/// Rows are the per-state feature vectors phi'_s.
struct FeatureMatrix {
  Matrix Phi;  // n x m

  std::size_t n() const noexcept { return static_cast<std::size_t>(Phi.rows()); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(Phi.cols()); }
};

struct Model {
  Mrp mrp;
  FeatureMatrix features;
};

/// Inverse-CDF sampling of s' ~ P(s, .) from a uniform draw in [0, 1).
/// Cumulative rows are cached row-major; trailing zero-probability states are
/// unreachable.
class TransitionSampler {
 public:
  explicit TransitionSampler(const Matrix& P);

  std::size_t next(std::size_t s, double u) const;
  std::size_t n() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> cumulative_;
};

/// Exact ground truth for a model.
struct OracleBundle {
  Vector pi;          // stationary distribution
  Matrix Sigma;       // Phi^T D Phi, D = diag(pi)
  double omega = 0;   // smallest eigenvalue of Sigma
  Vector theta_star;  // projected Bellman fixed point
  double sigma_noise = 1;  // max{1, r_bar, |theta_star|}

  auto D() const { return pi.asDiagonal(); }
};

/// Checks shape, stochasticity and discount; r_bar is set to max_s |R[s]|.
/// Throws Error{BadDims | NegativeProbability | NonStochasticRow |
/// GammaOutOfRange}.
Mrp validate_mrp(Matrix P, Vector R, double gamma);

/// Checks full column rank (smallest singular value > 1e-10) and
/// |phi'_s|^2 <= 1 for every row. Throws Error{InvalidFeatures | BadDims}.
FeatureMatrix validate_features(Matrix Phi);

/// Irreducibility (strong connectivity of the positivity pattern) and
/// aperiodicity (gcd of cycle lengths equal to one). Throws ReducibleChain or
/// PeriodicChain.
void check_ergodic(const Matrix& P);

/// Left eigenvector of P for eigenvalue 1, normalized onto the simplex and
/// polished by power iteration. Residual |pi^T P - pi^T|_inf <= 1e-10.
Vector stationary_distribution(const Mrp& mrp);

/// Solves A theta = b, A = Phi^T D (I - gamma P) Phi, b = Phi^T D R.
/// Throws SingularSystem when cond(A) > 1e12.
Vector fixed_point(const Mrp& mrp, const FeatureMatrix& phi, const Vector& pi);

/// Smallest eigenvalue of a symmetric matrix. Throws NotSymmetric when
/// max |S - S^T| > 1e-10.
double spectral_constant(const Matrix& Sigma);

/// V = (I - gamma P)^{-1} R.
Vector true_value_function(const Mrp& mrp);

struct MonteCarloEstimate {
  double mean = 0;
  double standard_error = 0;
};

/// Truncated discounted return from `start`, averaged over rollouts.
MonteCarloEstimate monte_carlo_value(const Mrp& mrp, std::size_t start,
                                     std::size_t rollouts, std::size_t horizon,
                                     std::uint64_t seed);

/// Random ergodic model: Dirichlet(1) rows lifted by a 1e-3 floor, rewards in
/// [0, 1], orthonormal feature columns with rows clipped to unit norm.
/// Deterministic in `seed`.
Model generate_synthetic(std::size_t n, std::size_t m, double gamma,
                         std::uint64_t seed);

/// Validates the pair and computes every oracle quantity.
OracleBundle build_oracles(const Model& model);

}  // namespace qfedtd
