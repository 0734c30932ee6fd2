#pragma once

#include <Eigen/Dense>

namespace funreg {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace funreg
