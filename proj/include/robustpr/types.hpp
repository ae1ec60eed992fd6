#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>

namespace robustpr {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

// Measurement rows are accessed individually all over the solver; row-major
// storage keeps each a_i contiguous.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Number of retained entries in a hard-thresholding step (the s of H_s).
struct SparsityBudget {
  Index count = 0;
};

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace robustpr
