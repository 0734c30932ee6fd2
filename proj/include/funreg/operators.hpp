#pragma once

#include <span>

#include "funreg/grid.hpp"
#include "funreg/kernels.hpp"
#include "funreg/types.hpp"

namespace funreg {

// An integral operator as a matrix acting on grid values:
// (A f)(t_i) = sum_j w_j k(t_i, t_j) f(t_j).
// self_adjoint() means symmetric w.r.t. the weighted inner product, i.e.
// W^{1/2} A W^{-1/2} is symmetric.
class DiscreteOperator {
 public:
  DiscreteOperator(Matrix matrix, Grid grid, bool self_adjoint);

  const Matrix& matrix() const { return matrix_; }
  const Grid& grid() const { return grid_; }
  bool self_adjoint() const { return self_adjoint_; }

  DiscreteFunction apply(const DiscreteFunction& f) const;
  Vector apply(const Vector& values) const { return matrix_ * values; }

 private:
  Matrix matrix_;
  Grid grid_;
  bool self_adjoint_;
};

// Eigensystem of a weighted-self-adjoint operator. Eigenvalues are sorted
// nonincreasing and clamped at zero; eigenfunction columns are orthonormal
// w.r.t. the weighted inner product.
class SpectralDecomposition {
 public:
  SpectralDecomposition(Vector eigenvalues, Matrix eigenfunctions, Grid grid, int clamped);

  const Vector& eigenvalues() const { return eigenvalues_; }
  // columns phi_l as grid values
  const Matrix& eigenfunctions() const { return eigenfunctions_; }
  const Grid& grid() const { return grid_; }
  // how many eigenvalues fell below -1e-8 * lambda_max before clamping
  int clamped_count() const { return clamped_; }
  Scalar lambda_max() const { return eigenvalues_.size() ? eigenvalues_(0) : 0.0; }

  DiscreteFunction eigenfunction(Index l) const;

  // c_l = <f, phi_l>_2
  Vector coefficients(const DiscreteFunction& f) const;
  DiscreteFunction synthesize(const Vector& coefficients) const;

  // Rebuild an operator with the same eigenfunctions and the given spectrum:
  // A' = Phi diag(vals) Phi^T W. Exact on the full decomposition since the
  // eigenfunctions form a complete W-orthonormal basis.
  DiscreteOperator with_eigenvalues(const Vector& vals) const;

 private:
  Vector eigenvalues_;
  Matrix eigenfunctions_;
  Grid grid_;
  int clamped_;
};

// A[i][j] = k(t_i, t_j) * w_j; always weighted-self-adjoint for symmetric kernels.
DiscreteOperator assemble(const KernelSpec& spec, const Grid& grid);

DiscreteOperator identity_operator(const Grid& grid);

// Symmetric eigenproblem on W^{1/2} A W^{-1/2}; throws UnsupportedOperatorError
// when the operator is not flagged self-adjoint. Tiny negative eigenvalues from
// discretized PSD kernels are clamped to zero so fractional powers stay real.
SpectralDecomposition decompose(const DiscreteOperator& op);

// Spectrum mapped through lambda -> lambda^exponent on the same eigenfunctions.
// Convention: 0^0 = 0, so exponent 0 acts as the projector onto the closure of
// the range. Negative exponents are rejected (see pinv_apply).
SpectralDecomposition powered(const SpectralDecomposition& dec, Scalar exponent);
DiscreteOperator fractional_power(const SpectralDecomposition& dec, Scalar exponent);

// T_K = L_C^{1/2} L_K L_C^{1/2}
DiscreteOperator compose_TK(const DiscreteOperator& LK, const SpectralDecomposition& LC_dec);
// T_C = L_K^{1/2} L_C L_K^{1/2}
DiscreteOperator compose_TC(const SpectralDecomposition& LK_dec, const DiscreteOperator& LC);

// Tr(A^s) = sum_l lambda_l^s for s in (0, 1].
Scalar trace_power(const SpectralDecomposition& dec, Scalar s);

// Largest eigenvalue of a self-adjoint PSD operator.
Scalar operator_norm(const DiscreteOperator& op);

// omega_t^k(A + lambda I) = prod_j (I - gamma_j (A + lambda I)), computed
// spectrally: eigenvalues prod_j (1 - gamma_j (lambda_l + lambda)). The empty
// product is the identity. Throws StepSizeTooLargeError (carrying the offending
// index) when gamma_j (lambda_max + lambda) > 1 for some j.
DiscreteOperator omega_product(const SpectralDecomposition& dec, std::span<const Scalar> gammas,
                               Scalar lambda);

struct PinvResult {
  DiscreteFunction value;
  Scalar discarded_energy;    // squared L2 mass of the dropped components
  Scalar discarded_fraction;  // discarded_energy / ||f||_2^2 (0 for f = 0)
};

// sum_{lambda_l > rel_cutoff * lambda_max} lambda_l^{-1} <f, phi_l> phi_l.
// rel_cutoff must lie in (0,1). An all-zero spectrum returns the zero function
// with everything discarded.
PinvResult pinv_apply(const SpectralDecomposition& dec, const DiscreteFunction& f,
                      Scalar rel_cutoff);

}  // namespace funreg
