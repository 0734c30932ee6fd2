#include "funreg/grid.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "funreg/errors.hpp"

namespace funreg {

namespace {

std::atomic<std::uint64_t> next_grid_id{1};

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on the Legendre
// recurrence, then mapped to [0,1].
void gauss_legendre_01(Index m, Vector& nodes, Vector& weights) {
  nodes.resize(m);
  weights.resize(m);
  const Index half = (m + 1) / 2;
  for (Index i = 0; i < half; ++i) {
    // Chebyshev-like initial guess for the i-th root of P_m.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(m) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (Index k = 2; k <= m; ++k) {
        const double pk = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 -
                           (static_cast<double>(k) - 1.0) * p0) /
                          static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes(i) = x;
    weights(i) = w;
    nodes(m - 1 - i) = -x;
    weights(m - 1 - i) = w;
  }
  // map [-1,1] -> [0,1]; total weight 2 -> 1. The fill order above already
  // leaves the mapped nodes strictly increasing.
  for (Index i = 0; i < m; ++i) {
    nodes(i) = 0.5 * (1.0 - nodes(i));
    weights(i) *= 0.5;
  }
}

}  // namespace

Grid build_grid(Index size, QuadScheme scheme) {
  if (size < 8) throw std::invalid_argument("build_grid: size must be >= 8");
  auto data = std::make_shared<Grid::Data>();
  data->scheme = scheme;
  data->id = next_grid_id.fetch_add(1, std::memory_order_relaxed);
  switch (scheme) {
    case QuadScheme::CompositeTrapezoid: {
      const double h = 1.0 / static_cast<double>(size - 1);
      data->nodes = Vector::LinSpaced(size, 0.0, 1.0);
      data->weights = Vector::Constant(size, h);
      data->weights(0) = 0.5 * h;
      data->weights(size - 1) = 0.5 * h;
      break;
    }
    case QuadScheme::GaussLegendre:
      gauss_legendre_01(size, data->nodes, data->weights);
      break;
  }
  return Grid(std::move(data));
}

DiscreteFunction make_function(const Grid& grid, Vector values) {
  if (values.size() != grid.size())
    throw std::invalid_argument("make_function: value count does not match grid size");
  if (!values.allFinite())
    throw std::invalid_argument("make_function: values must be finite");
  return DiscreteFunction{std::move(values), grid};
}

DiscreteFunction zero_function(const Grid& grid) {
  return DiscreteFunction{Vector::Zero(grid.size()), grid};
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (a.id() != b.id())
    throw GridMismatchError(std::string(where) + ": operands live on different grids");
}

Scalar inner_product(const DiscreteFunction& f, const DiscreteFunction& g) {
  require_same_grid(f.grid, g.grid, "inner_product");
  return (f.grid.weights().array() * f.values.array() * g.values.array()).sum();
}

Scalar l2_norm(const DiscreteFunction& f) {
  return std::sqrt(std::max(0.0, inner_product(f, f)));
}

}  // namespace funreg
