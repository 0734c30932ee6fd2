#include "funreg/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "funreg/errors.hpp"

namespace funreg {

namespace {

constexpr Scalar kSelfAdjointTol = 1e-10;
constexpr Scalar kClampTol = 1e-8;

Matrix weighted_symmetrization(const DiscreteOperator& op) {
  const Vector sqrt_w = op.grid().weights().array().sqrt();
  const Vector inv_sqrt_w = sqrt_w.array().inverse();
  return sqrt_w.asDiagonal() * op.matrix() * inv_sqrt_w.asDiagonal();
}

}  // namespace

DiscreteOperator::DiscreteOperator(Matrix matrix, Grid grid, bool self_adjoint)
    : matrix_(std::move(matrix)), grid_(std::move(grid)), self_adjoint_(self_adjoint) {
  if (matrix_.rows() != grid_.size() || matrix_.cols() != grid_.size())
    throw std::invalid_argument("DiscreteOperator: matrix shape does not match grid");
  if (self_adjoint_) {
    const Matrix s = weighted_symmetrization(*this);
    const Scalar asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    const Scalar scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if (asym > kSelfAdjointTol * scale)
      throw UnsupportedOperatorError(
          "DiscreteOperator: flagged self-adjoint but W^{1/2} A W^{-1/2} is not symmetric");
  }
}

DiscreteFunction DiscreteOperator::apply(const DiscreteFunction& f) const {
  require_same_grid(grid_, f.grid, "DiscreteOperator::apply");
  return DiscreteFunction{matrix_ * f.values, grid_};
}

SpectralDecomposition::SpectralDecomposition(Vector eigenvalues, Matrix eigenfunctions, Grid grid,
                                             int clamped)
    : eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions)),
      grid_(std::move(grid)),
      clamped_(clamped) {}

DiscreteFunction SpectralDecomposition::eigenfunction(Index l) const {
  return DiscreteFunction{eigenfunctions_.col(l), grid_};
}

Vector SpectralDecomposition::coefficients(const DiscreteFunction& f) const {
  require_same_grid(grid_, f.grid, "SpectralDecomposition::coefficients");
  return eigenfunctions_.transpose() * (grid_.weights().asDiagonal() * f.values);
}

DiscreteFunction SpectralDecomposition::synthesize(const Vector& coefficients) const {
  if (coefficients.size() != eigenvalues_.size())
    throw std::invalid_argument("synthesize: coefficient count does not match spectrum");
  return DiscreteFunction{eigenfunctions_ * coefficients, grid_};
}

DiscreteOperator SpectralDecomposition::with_eigenvalues(const Vector& vals) const {
  if (vals.size() != eigenvalues_.size())
    throw std::invalid_argument("with_eigenvalues: wrong spectrum length");
  Matrix m = eigenfunctions_ * vals.asDiagonal() * eigenfunctions_.transpose() *
             grid_.weights().asDiagonal();
  return DiscreteOperator(std::move(m), grid_, true);
}

DiscreteOperator assemble(const KernelSpec& spec, const Grid& grid) {
  const Index m = grid.size();
  Matrix k(m, m);
  for (Index i = 0; i < m; ++i) {
    k(i, i) = eval_kernel(spec, grid.nodes()(i), grid.nodes()(i));
    for (Index j = i + 1; j < m; ++j) {
      const Scalar v = eval_kernel(spec, grid.nodes()(i), grid.nodes()(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return DiscreteOperator(k * grid.weights().asDiagonal(), grid, true);
}

DiscreteOperator identity_operator(const Grid& grid) {
  return DiscreteOperator(Matrix::Identity(grid.size(), grid.size()), grid, true);
}

SpectralDecomposition decompose(const DiscreteOperator& op) {
  if (!op.self_adjoint())
    throw UnsupportedOperatorError("decompose: operator is not self-adjoint");
  const Grid& grid = op.grid();
  const Vector sqrt_w = grid.weights().array().sqrt();
  const Vector inv_sqrt_w = sqrt_w.array().inverse();
  Matrix s = sqrt_w.asDiagonal() * op.matrix() * inv_sqrt_w.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("decompose: eigensolver failed to converge");

  const Index m = grid.size();
  Vector vals(m);
  Matrix funcs(m, m);
  // Eigen returns ascending order; store nonincreasing.
  for (Index l = 0; l < m; ++l) {
    vals(l) = solver.eigenvalues()(m - 1 - l);
    funcs.col(l) = inv_sqrt_w.asDiagonal() * solver.eigenvectors().col(m - 1 - l);
  }
  const Scalar lambda_max = std::max(vals(0), 0.0);
  int clamped = 0;
  for (Index l = 0; l < m; ++l) {
    if (vals(l) < 0.0) {
      if (vals(l) < -kClampTol * lambda_max) ++clamped;
      vals(l) = 0.0;
    }
  }
  return SpectralDecomposition(std::move(vals), std::move(funcs), grid, clamped);
}

SpectralDecomposition powered(const SpectralDecomposition& dec, Scalar exponent) {
  if (exponent < 0)
    throw std::invalid_argument("fractional_power: exponent must be >= 0 (use pinv_apply)");
  Vector vals(dec.eigenvalues().size());
  for (Index l = 0; l < vals.size(); ++l) {
    const Scalar v = dec.eigenvalues()(l);
    vals(l) = (v == 0.0) ? 0.0 : std::pow(v, exponent);  // 0^0 = 0: range projector
  }
  return SpectralDecomposition(std::move(vals), dec.eigenfunctions(), dec.grid(),
                               dec.clamped_count());
}

DiscreteOperator fractional_power(const SpectralDecomposition& dec, Scalar exponent) {
  const SpectralDecomposition p = powered(dec, exponent);
  return dec.with_eigenvalues(p.eigenvalues());
}

DiscreteOperator compose_TK(const DiscreteOperator& LK, const SpectralDecomposition& LC_dec) {
  require_same_grid(LK.grid(), LC_dec.grid(), "compose_TK");
  const DiscreteOperator lc_half = fractional_power(LC_dec, 0.5);
  Matrix m = lc_half.matrix() * LK.matrix() * lc_half.matrix();
  return DiscreteOperator(std::move(m), LK.grid(), true);
}

DiscreteOperator compose_TC(const SpectralDecomposition& LK_dec, const DiscreteOperator& LC) {
  require_same_grid(LK_dec.grid(), LC.grid(), "compose_TC");
  const DiscreteOperator lk_half = fractional_power(LK_dec, 0.5);
  Matrix m = lk_half.matrix() * LC.matrix() * lk_half.matrix();
  return DiscreteOperator(std::move(m), LC.grid(), true);
}

Scalar trace_power(const SpectralDecomposition& dec, Scalar s) {
  if (!(s > 0.0) || s > 1.0) throw std::invalid_argument("trace_power: s must lie in (0,1]");
  Scalar acc = 0.0;
  for (Index l = 0; l < dec.eigenvalues().size(); ++l) {
    const Scalar v = dec.eigenvalues()(l);
    if (v > 0.0) acc += std::pow(v, s);
  }
  return acc;
}

Scalar operator_norm(const DiscreteOperator& op) {
  if (!op.self_adjoint())
    throw UnsupportedOperatorError("operator_norm: operator is not self-adjoint");
  Matrix s = weighted_symmetrization(op);
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

DiscreteOperator omega_product(const SpectralDecomposition& dec, std::span<const Scalar> gammas,
                               Scalar lambda) {
  const Scalar top = dec.lambda_max() + lambda;
  for (std::size_t j = 0; j < gammas.size(); ++j) {
    if (gammas[j] * top > 1.0 + 1e-12)
      throw StepSizeTooLargeError("omega_product: gamma_j (lambda_max + lambda) > 1",
                                  static_cast<std::int64_t>(j));
  }
  Vector vals(dec.eigenvalues().size());
  for (Index l = 0; l < vals.size(); ++l) {
    Scalar prod = 1.0;
    for (const Scalar g : gammas) prod *= 1.0 - g * (dec.eigenvalues()(l) + lambda);
    vals(l) = prod;
  }
  return dec.with_eigenvalues(vals);
}

PinvResult pinv_apply(const SpectralDecomposition& dec, const DiscreteFunction& f,
                      Scalar rel_cutoff) {
  if (!(rel_cutoff > 0.0) || !(rel_cutoff < 1.0))
    throw std::invalid_argument("pinv_apply: rel_cutoff must lie in (0,1)");
  require_same_grid(dec.grid(), f.grid, "pinv_apply");
  const Scalar cutoff = rel_cutoff * dec.lambda_max();
  const Vector coeffs = dec.coefficients(f);
  Vector out = Vector::Zero(coeffs.size());
  Scalar retained = 0.0;
  for (Index l = 0; l < coeffs.size(); ++l) {
    if (dec.eigenvalues()(l) > cutoff && dec.eigenvalues()(l) > 0.0) {
      out(l) = coeffs(l) / dec.eigenvalues()(l);
      retained += coeffs(l) * coeffs(l);
    }
  }
  const Scalar total = inner_product(f, f);
  const Scalar discarded = std::max(0.0, total - retained);
  return PinvResult{dec.synthesize(out), discarded, total > 0.0 ? discarded / total : 0.0};
}

}  // namespace funreg
