#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ebf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A location in field space; its size is the spatial dimension d.
using Point = std::vector<double>;

}  // namespace ebf
