#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qfedtd/mrp.hpp"
#include "qfedtd/random.hpp"

namespace qfedtd {

enum class QuantizerKind { Identity, StochasticUniform };

/// Norm that sets the grid scale of the uniform quantizer.
enum class QuantizerScaling { L2, LInf };

/// Unbiased quantizer: E[Q(x)] = x and E|Q(x) - x|^2 <= zeta |x|^2.
///
/// The stochastic-uniform quantizer with b bits uses s = 2^b - 1 levels per
/// unit of scale, i.e. the grid {l * scale / s : l = -s..s}, and rounds each
/// component to one of its two neighbouring grid points with probabilities
/// that make the expectation exact. zeta = min(m / s^2, sqrt(m) / s) holds for
/// either scaling norm (see docs/quantizer_distortion.md).
struct QuantizerSpec {
  QuantizerKind kind = QuantizerKind::Identity;
  int bits = 0;
  QuantizerScaling scaling = QuantizerScaling::L2;
  double zeta = 0.0;

  static QuantizerSpec identity() { return {}; }
  /// Throws InvalidArgument unless 1 <= bits <= 30 and dimension >= 1.
  static QuantizerSpec stochastic_uniform(int bits, std::size_t dimension,
                                          QuantizerScaling scaling = QuantizerScaling::L2);

  int levels() const noexcept { return (1 << bits) - 1; }
  double zeta_prime() const noexcept { return zeta > 1.0 ? zeta : 1.0; }
  /// Payload bits per upload: b per component plus a 32-bit float scale.
  std::size_t payload_bits(std::size_t dimension) const noexcept;
};

struct ErasureSpec {
  double p = 1.0;  // success probability in (0, 1]

  /// Throws InvalidArgument unless p lies in (0, 1].
  static ErasureSpec with_success_probability(double p);
};

/// Scale used for the grid of `x` under `spec` (0 for the zero vector).
double quantizer_scale(const QuantizerSpec& spec, const Vector& x);

/// Throws NonFiniteInput for NaN/inf components. The zero vector maps to
/// itself; the identity kind returns x unchanged.
Vector quantize(const QuantizerSpec& spec, const Vector& x, RandomStream& stream);

/// In-place variant used on the hot path; `x` is overwritten with Q(x).
void quantize_in_place(const QuantizerSpec& spec, Eigen::Ref<Vector> x, RandomStream& stream);

/// One i.i.d. Bernoulli(p) bit per agent.
std::vector<bool> erasure_mask(const ErasureSpec& spec, std::size_t n_agents,
                               RandomStream& stream);

}  // namespace qfedtd
