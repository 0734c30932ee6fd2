#pragma once

#include <cstdint>
#include <memory>

#include "funreg/types.hpp"

namespace funreg {

enum class QuadScheme { CompositeTrapezoid, GaussLegendre };

// Quadrature nodes and weights on T = [0,1]; defines the discrete L2 geometry
// every other module uses. Immutable and cheap to copy (shared state), safe
// to share across threads.
class Grid {
 public:
  Grid() = default;

  const Vector& nodes() const { return data_->nodes; }
  const Vector& weights() const { return data_->weights; }
  QuadScheme scheme() const { return data_->scheme; }
  Index size() const { return data_->nodes.size(); }
  std::uint64_t id() const { return data_ ? data_->id : 0; }
  bool valid() const { return static_cast<bool>(data_); }

  friend Grid build_grid(Index size, QuadScheme scheme);

 private:
  struct Data {
    Vector nodes;
    Vector weights;
    QuadScheme scheme;
    std::uint64_t id;
  };
  explicit Grid(std::shared_ptr<const Data> d) : data_(std::move(d)) {}
  std::shared_ptr<const Data> data_;
};

// A function T -> R as values on the grid nodes. Carries grid identity.
struct DiscreteFunction {
  Vector values;
  Grid grid;
};

// size >= 8; weights sum to 1; trapezoid nodes are equispaced including the
// endpoints, Gauss-Legendre is the classical rule mapped to [0,1].
Grid build_grid(Index size, QuadScheme scheme);

DiscreteFunction make_function(const Grid& grid, Vector values);
DiscreteFunction zero_function(const Grid& grid);

// Throws GridMismatchError when the ids differ.
void require_same_grid(const Grid& a, const Grid& b, const char* where);

// <f, g>_2 = sum_i w_i f_i g_i
Scalar inner_product(const DiscreteFunction& f, const DiscreteFunction& g);

Scalar l2_norm(const DiscreteFunction& f);

}  // namespace funreg
