#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lbmhe {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One matrix (or vector) per uncertain parameter θⱼ.
using MatrixList = std::vector<Matrix>;
using VectorList = std::vector<Vector>;

/// Symmetric part (M + Mᵀ)/2.
inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace lbmhe
