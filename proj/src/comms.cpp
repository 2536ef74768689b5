#include "qfedtd/comms.hpp"

#include <algorithm>
#include <cmath>

#include "qfedtd/error.hpp"

namespace qfedtd {

QuantizerSpec QuantizerSpec::stochastic_uniform(int bits, std::size_t dimension,
                                                QuantizerScaling scaling) {
  if (bits < 1 || bits > 30) {
    throw Error(ErrorKind::InvalidArgument, "bits per component must lie in [1, 30]");
  }
  if (dimension < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be >= 1");
  QuantizerSpec spec;
  spec.kind = QuantizerKind::StochasticUniform;
  spec.bits = bits;
  spec.scaling = scaling;
  const double s = static_cast<double>(spec.levels());
  const double m = static_cast<double>(dimension);
  spec.zeta = std::min(m / (s * s), std::sqrt(m) / s);
  return spec;
}

std::size_t QuantizerSpec::payload_bits(std::size_t dimension) const noexcept {
  if (kind == QuantizerKind::Identity) return dimension * 64;
  return dimension * static_cast<std::size_t>(bits) + 32;
}

ErasureSpec ErasureSpec::with_success_probability(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "success probability must lie in (0, 1]");
  }
  return ErasureSpec{p};
}

double quantizer_scale(const QuantizerSpec& spec, const Vector& x) {
  return spec.scaling == QuantizerScaling::L2 ? x.norm() : x.lpNorm<Eigen::Infinity>();
}

void quantize_in_place(const QuantizerSpec& spec, Eigen::Ref<Vector> x, RandomStream& stream) {
  if (!x.allFinite()) throw Error(ErrorKind::NonFiniteInput, "cannot quantize non-finite vector");
  if (spec.kind == QuantizerKind::Identity) return;

  const double scale = spec.scaling == QuantizerScaling::L2 ? x.norm()
                                                            : x.lpNorm<Eigen::Infinity>();
  const double s = static_cast<double>(spec.levels());
  // Every component consumes one draw so stream positions do not depend on
  // the data.
  if (scale == 0.0) {
    for (Eigen::Index i = 0; i < x.size(); ++i) stream();
    return;
  }
  const double step = scale / s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = stream.uniform();
    const double level = std::min(std::abs(x(i)) / step, s);
    double lower = std::floor(level);
    if (u < level - lower) lower += 1.0;
    x(i) = std::copysign(lower * step, x(i));
  }
}

Vector quantize(const QuantizerSpec& spec, const Vector& x, RandomStream& stream) {
  Vector out = x;
  quantize_in_place(spec, out, stream);
  return out;
}

std::vector<bool> erasure_mask(const ErasureSpec& spec, std::size_t n_agents,
                               RandomStream& stream) {
  std::vector<bool> mask(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) mask[i] = stream.uniform() < spec.p;
  return mask;
}

}  // namespace qfedtd
