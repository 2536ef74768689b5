// Test-only reference computations. Nothing here calls into the library's
// solvers, so agreement is an independent check.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace qfedtd::oracle {

// Solves pi^T (P - I) = 0 with one equation replaced by sum(pi) = 1.
inline Eigen::VectorXd stationary_by_linear_solve(const Eigen::MatrixXd& P) {
  const auto n = P.rows();
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return A.fullPivLu().solve(b);
}

// Bellman iteration V <- R + gamma P V until the sup-norm change is <= tol.
inline Eigen::VectorXd value_iteration(const Eigen::MatrixXd& P, const Eigen::VectorXd& R,
                                       double gamma, double tol = 1e-12) {
  Eigen::VectorXd V = Eigen::VectorXd::Zero(R.size());
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd next = R + gamma * P * V;
    const double change = (next - V).lpNorm<Eigen::Infinity>();
    V = next;
    if (change <= tol) break;
  }
  return V;
}

// Brute-force mixing time: explicit loop over powers with naive products.
inline std::size_t mixing_by_powering(const Eigen::MatrixXd& P, const Eigen::VectorXd& pi,
                                      double eps) {
  const auto n = P.rows();
  std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
  for (Eigen::Index i = 0; i < n; ++i) M[i][i] = 1.0;
  for (std::size_t k = 0;; ++k) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
      double tv = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) tv += std::abs(M[s][t] - pi(t));
      worst = std::max(worst, 0.5 * tv);
    }
    if (worst <= eps) return k;
    auto next = M;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double acc = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) acc += M[i][l] * P(l, j);
        next[i][j] = acc;
      }
    M = std::move(next);
  }
}

}  // namespace qfedtd::oracle

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace qfedtd::oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

// The finite-time bound evaluated in 50-digit arithmetic, with rho^T by
// repeated squaring instead of exp/log1p.
inline Big bound_multiprecision(double alpha, double omega, double gamma, double p,
                                std::size_t tau, double sigma, double zeta_prime,
                                double delta0_sq, std::size_t N, std::size_t T, double C2,
                                double C3, int q) {
  const Big rho = Big(1) - Big(alpha) * Big(omega) * (Big(1) - Big(gamma)) * Big(p);
  Big power = 1, base = rho;
  for (std::size_t e = T; e > 0; e >>= 1) {
    if (e & 1) power *= base;
    base *= base;
  }
  const Big s2 = Big(sigma) * Big(sigma);
  const Big c1 = Big(4) * Big(delta0_sq) + Big(2) * Big(p) * s2;
  Big alpha_pow = 1;
  for (int i = 0; i < q + 1; ++i) alpha_pow *= Big(alpha);
  const Big variance = Big(tau) * s2 / (Big(omega) * (Big(1) - Big(gamma))) *
                       (Big(C2) * Big(alpha) * Big(zeta_prime) / Big(N) + Big(C3) * alpha_pow);
  return power * c1 + variance;
}

}  // namespace qfedtd::oracle
