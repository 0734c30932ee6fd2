#include "funreg/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace funreg {

KernelSpec KernelSpec::gaussian(Scalar bandwidth) {
  if (!(bandwidth > 0)) throw std::invalid_argument("gaussian kernel: bandwidth must be > 0");
  KernelSpec s;
  s.family = KernelFamily::Gaussian;
  s.bandwidth = bandwidth;
  return s;
}

KernelSpec KernelSpec::brownian() {
  KernelSpec s;
  s.family = KernelFamily::Brownian;
  return s;
}

KernelSpec KernelSpec::sobolev1() {
  KernelSpec s;
  s.family = KernelFamily::Sobolev1;
  return s;
}

KernelSpec KernelSpec::cosine_series(Scalar decay, Index length) {
  if (!(decay > 1)) throw std::invalid_argument("cosine-series kernel: decay exponent must be > 1");
  if (length < 4) throw std::invalid_argument("cosine-series kernel: length must be >= 4");
  KernelSpec s;
  s.family = KernelFamily::CosineSeries;
  s.decay = decay;
  s.length = length;
  return s;
}

std::string KernelSpec::name() const {
  switch (family) {
    case KernelFamily::Gaussian:
      return "gaussian(bw=" + std::to_string(bandwidth) + ")";
    case KernelFamily::Brownian:
      return "brownian";
    case KernelFamily::Sobolev1:
      return "sobolev1";
    case KernelFamily::CosineSeries:
      return "cosine-series(p=" + std::to_string(decay) + ",L=" + std::to_string(length) + ")";
  }
  return "unknown";
}

Scalar eval_kernel(const KernelSpec& spec, Scalar s, Scalar t) {
  if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0)
    throw std::invalid_argument("eval_kernel: arguments must lie in [0,1]");
  switch (spec.family) {
    case KernelFamily::Gaussian: {
      const Scalar d = (s - t) / spec.bandwidth;
      return std::exp(-0.5 * d * d);
    }
    case KernelFamily::Brownian:
      return std::min(s, t);
    case KernelFamily::Sobolev1:
      return 1.0 + std::min(s, t);
    case KernelFamily::CosineSeries: {
      Scalar acc = 0.0;
      for (Index l = 1; l <= spec.length; ++l) {
        const Scalar ld = static_cast<Scalar>(l);
        acc += std::pow(ld, -spec.decay) * 2.0 * std::cos(ld * std::numbers::pi * s) *
               std::cos(ld * std::numbers::pi * t);
      }
      return acc;
    }
  }
  throw std::invalid_argument("eval_kernel: unknown family");
}

Scalar diagonal_sup(const KernelSpec& spec, const Grid& grid) {
  Scalar best = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const Scalar t = grid.nodes()(i);
    best = std::max(best, eval_kernel(spec, t, t));
  }
  return best;
}

}  // namespace funreg
