#include "qfedtd/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include "qfedtd/error.hpp"
#include "qfedtd/random.hpp"

namespace qfedtd {

namespace {

constexpr double kRowSumTolerance = 1e-9;
constexpr double kStationaryResidual = 1e-10;
constexpr double kMaxCondition = 1e12;
constexpr double kSymmetryTolerance = 1e-10;

std::string describe_row(Eigen::Index row, double value) {
  std::ostringstream os;
  os.precision(17);
  os << "row " << row << " value " << value;
  return os.str();
}

// Breadth-first reachability over the positivity pattern of P (or P^T).
std::vector<long> bfs_levels(const Matrix& P, bool transpose) {
  const auto n = P.rows();
  std::vector<long> level(static_cast<std::size_t>(n), -1);
  std::queue<Eigen::Index> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      const double w = transpose ? P(v, u) : P(u, v);
      if (w > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        frontier.push(v);
      }
    }
  }
  return level;
}

double stationary_residual(const Vector& pi, const Matrix& P) {
  return (P.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
}

Vector power_iteration(const Matrix& P, Vector pi, std::size_t max_iters) {
  const Matrix Pt = P.transpose();
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector next = Pt * pi;
    next /= next.sum();
    const double change = (next - pi).lpNorm<Eigen::Infinity>();
    pi = std::move(next);
    if (change < 1e-15) break;
  }
  return pi;
}

}  // namespace

TransitionSampler::TransitionSampler(const Matrix& P)
    : n_(static_cast<std::size_t>(P.rows())), cumulative_(n_ * n_) {
  for (std::size_t s = 0; s < n_; ++s) {
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t t = 0; t < n_; ++t) {
      const double w = P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
      acc += w;
      cumulative_[s * n_ + t] = acc;
      if (w > 0.0) last_positive = t;
    }
    // Absorb row-sum rounding into the last reachable state.
    for (std::size_t t = last_positive; t < n_; ++t) cumulative_[s * n_ + t] = 1.0;
  }
}

std::size_t TransitionSampler::next(std::size_t s, double u) const {
  const auto first = cumulative_.begin() + static_cast<std::ptrdiff_t>(s * n_);
  const auto it = std::upper_bound(first, first + static_cast<std::ptrdiff_t>(n_), u);
  return static_cast<std::size_t>(it - first);
}

Mrp validate_mrp(Matrix P, Vector R, double gamma) {
  if (P.rows() < 2 || P.rows() != P.cols()) {
    throw Error(ErrorKind::BadDims, "transition matrix must be square with n >= 2");
  }
  if (R.size() != P.rows()) {
    throw Error(ErrorKind::BadDims, "reward vector length differs from state count");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorKind::GammaOutOfRange, "discount must lie in (0, 1)");
  }
  if (!P.allFinite() || !R.allFinite()) {
    throw Error(ErrorKind::NonFiniteInput, "model contains non-finite entries");
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (P(i, j) < 0.0) {
        throw Error(ErrorKind::NegativeProbability, describe_row(i, P(i, j)));
      }
    }
    const double sum = P.row(i).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorKind::NonStochasticRow, describe_row(i, sum));
    }
  }
  Mrp mrp;
  mrp.r_bar = R.cwiseAbs().maxCoeff();
  mrp.P = std::move(P);
  mrp.R = std::move(R);
  mrp.gamma = gamma;
  return mrp;
}

FeatureMatrix validate_features(Matrix Phi) {
  if (Phi.rows() < 1 || Phi.cols() < 1 || Phi.cols() > Phi.rows()) {
    throw Error(ErrorKind::BadDims, "feature matrix must be n x m with 1 <= m <= n");
  }
  if (!Phi.allFinite()) {
    throw Error(ErrorKind::NonFiniteInput, "feature matrix contains non-finite entries");
  }
  for (Eigen::Index s = 0; s < Phi.rows(); ++s) {
    if (Phi.row(s).squaredNorm() > 1.0 + 1e-12) {
      throw Error(ErrorKind::InvalidFeatures, "feature row exceeds unit norm: " +
                                                  describe_row(s, Phi.row(s).norm()));
    }
  }
  Eigen::JacobiSVD<Matrix> svd(Phi);
  const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smallest > 1e-10)) {
    throw Error(ErrorKind::InvalidFeatures, "feature columns are not linearly independent");
  }
  return FeatureMatrix{std::move(Phi)};
}

void check_ergodic(const Matrix& P) {
  const auto forward = bfs_levels(P, false);
  const auto backward = bfs_levels(P, true);
  const auto unreached = [](long l) { return l < 0; };
  if (std::any_of(forward.begin(), forward.end(), unreached) ||
      std::any_of(backward.begin(), backward.end(), unreached)) {
    throw Error(ErrorKind::ReducibleChain, "positivity pattern is not strongly connected");
  }
  // The period of an irreducible chain is the gcd of level[u] + 1 - level[v]
  // over all edges u -> v of a BFS layering.
  long period = 0;
  for (Eigen::Index u = 0; u < P.rows(); ++u) {
    for (Eigen::Index v = 0; v < P.cols(); ++v) {
      if (P(u, v) > 0.0) {
        const long d = forward[static_cast<std::size_t>(u)] + 1 -
                       forward[static_cast<std::size_t>(v)];
        period = std::gcd(period, std::abs(d));
      }
    }
  }
  if (period != 1) {
    throw Error(ErrorKind::PeriodicChain, "chain has period " + std::to_string(period));
  }
}

Vector stationary_distribution(const Mrp& mrp) {
  check_ergodic(mrp.P);
  const auto n = mrp.P.rows();

  Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::EigenSolver<Matrix> solver(mrp.P.transpose());
  if (solver.info() == Eigen::Success) {
    const auto& values = solver.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
      if (std::abs(values(i) - 1.0) < std::abs(values(best) - 1.0)) best = i;
    }
    Vector candidate = solver.eigenvectors().col(best).real();
    const double total = candidate.sum();
    if (std::abs(total) > 1e-300) {
      candidate /= total;
      pi = candidate.cwiseMax(0.0);
      pi /= pi.sum();
    }
  }
  pi = power_iteration(mrp.P, std::move(pi), 64);
  if (stationary_residual(pi, mrp.P) > kStationaryResidual) {
    pi = power_iteration(mrp.P, pi, 1'000'000);
  }
  if (stationary_residual(pi, mrp.P) > kStationaryResidual) {
    throw Error(ErrorKind::MixingNotReached, "stationary distribution did not converge");
  }
  return pi;
}

Vector fixed_point(const Mrp& mrp, const FeatureMatrix& phi, const Vector& pi) {
  if (phi.Phi.rows() != mrp.P.rows() || pi.size() != mrp.P.rows()) {
    throw Error(ErrorKind::DimMismatch, "features, distribution and model disagree on n");
  }
  const auto n = mrp.P.rows();
  const Matrix weighted = phi.Phi.transpose() * pi.asDiagonal();
  const Matrix A =
      weighted * (Matrix::Identity(n, n) - mrp.gamma * mrp.P) * phi.Phi;
  const Vector b = weighted * mrp.R;

  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 0.0) || sv(0) / smallest > kMaxCondition) {
    throw Error(ErrorKind::SingularSystem, "projected Bellman system is ill-conditioned");
  }
  Vector theta = A.partialPivLu().solve(b);
  // One step of iterative refinement.
  theta += A.partialPivLu().solve(b - A * theta);
  return theta;
}

double spectral_constant(const Matrix& Sigma) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() == 0) {
    throw Error(ErrorKind::BadDims, "matrix must be square and non-empty");
  }
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw Error(ErrorKind::NotSymmetric, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(Sigma, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

Vector true_value_function(const Mrp& mrp) {
  const auto n = mrp.P.rows();
  return (Matrix::Identity(n, n) - mrp.gamma * mrp.P).partialPivLu().solve(mrp.R);
}

MonteCarloEstimate monte_carlo_value(const Mrp& mrp, std::size_t start,
                                     std::size_t rollouts, std::size_t horizon,
                                     std::uint64_t seed) {
  if (start >= mrp.n() || rollouts < 2) {
    throw Error(ErrorKind::InvalidArgument, "bad start state or too few rollouts");
  }
  const TransitionSampler sampler(mrp.P);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < rollouts; ++r) {
    RandomStream stream(seed, StreamPurpose::MonteCarlo, r);
    std::size_t s = start;
    double discount = 1.0;
    double ret = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      ret += discount * mrp.R(static_cast<Eigen::Index>(s));
      discount *= mrp.gamma;
      s = sampler.next(s, stream.uniform());
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double count = static_cast<double>(rollouts);
  const double mean = sum / count;
  const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  return {mean, std::sqrt(var / count)};
}

Model generate_synthetic(std::size_t n, std::size_t m, double gamma, std::uint64_t seed) {
  if (n < 2 || m < 1 || m > n) {
    throw Error(ErrorKind::BadDims, "require n >= 2 and 1 <= m <= n");
  }
  constexpr double kFloor = 1e-3;
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);

  RandomStream stream(seed, StreamPurpose::Generator);

  // Dirichlet(1, ..., 1) rows via normalized exponentials.
  Matrix P(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < ni; ++j) {
      P(i, j) = -std::log1p(-stream.uniform());
    }
    P.row(i) /= P.row(i).sum();
    P.row(i).array() += kFloor;
    P.row(i) /= P.row(i).sum();
  }

  Vector R(ni);
  for (Eigen::Index i = 0; i < ni; ++i) R(i) = stream.uniform();

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix gaussian(ni, mi);
  for (Eigen::Index j = 0; j < mi; ++j) {
    for (Eigen::Index i = 0; i < ni; ++i) gaussian(i, j) = normal(stream);
  }
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix Phi = qr.householderQ() * Matrix::Identity(ni, mi);
  for (Eigen::Index s = 0; s < ni; ++s) {
    const double norm = Phi.row(s).norm();
    if (norm > 1.0) Phi.row(s) /= norm * (1.0 + 1e-15);
  }

  return Model{validate_mrp(std::move(P), std::move(R), gamma),
               validate_features(std::move(Phi))};
}

OracleBundle build_oracles(const Model& model) {
  const auto& mrp = model.mrp;
  const auto& phi = model.features;
  if (phi.Phi.rows() != mrp.P.rows()) {
    throw Error(ErrorKind::DimMismatch, "feature rows differ from state count");
  }
  OracleBundle oracle;
  oracle.pi = stationary_distribution(mrp);
  Matrix Sigma = phi.Phi.transpose() * oracle.pi.asDiagonal() * phi.Phi;
  oracle.Sigma = 0.5 * (Sigma + Sigma.transpose());
  oracle.omega = spectral_constant(oracle.Sigma);
  oracle.theta_star = fixed_point(mrp, phi, oracle.pi);
  oracle.sigma_noise = std::max({1.0, mrp.r_bar, oracle.theta_star.norm()});
  return oracle;
}

}  // namespace qfedtd
