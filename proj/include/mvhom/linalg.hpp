#pragma once

#include <Eigen/Dense>

namespace mvhom {

// Ambient dimension d and domain dimension N are small; fixed maximum sizes
// keep the inner loops free of heap allocations.
inline constexpr int kMaxAmbient = 4;
inline constexpr int kMaxDomain = 3;
inline constexpr int kMaxFlat = kMaxAmbient * kMaxDomain;

/// Point of R^d.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
/// Point of R^N (cell coordinates y).
using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDomain, 1>;
/// d x N matrix (a slope xi, columns are partial derivatives).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxDomain>;
/// d x d matrix.
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;
/// N x N matrix.
using MatN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDomain, kMaxDomain>;
/// Symmetric metric on vec(xi), column-major flattening (dN x dN).
using MatFlat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxFlat, kMaxFlat>;

inline double frobenius(const Mat& xi) { return xi.norm(); }

/// Outer product a (x) nu as a d x N matrix.
inline Mat outer(const Vec& a, const VecN& nu) { return a * nu.transpose(); }

}  // namespace mvhom
