#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "ahocda/tensor.hpp"

namespace ahocda::linalg {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline MatMap view(Matrix& m) { return {m.data.data(), m.rows, m.cols}; }
inline ConstMatMap view(const Matrix& m) { return {m.data.data(), m.rows, m.cols}; }

/// A feature map seen as an (H*W) x C matrix, one row per location.
inline MatMap rows_view(Tensor& t) { return {t.data.data(), static_cast<Eigen::Index>(t.h) * t.w, t.c}; }
inline ConstMatMap rows_view(const Tensor& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.h) * t.w, t.c};
}

/// exp of a max-shifted softmax logit. Terms below e^-300 are returned as
/// exact zeros: they cannot move a normalized probability, and letting them
/// through fills later products with subnormals that stall the FPU.
inline double softmax_exp(double shifted) { return shifted < -300.0 ? 0.0 : std::exp(shifted); }

}  // namespace ahocda::linalg
