#pragma once

#include <filesystem>
#include <vector>

#include "mvhom/linalg.hpp"

namespace mvhom {

/// Scalar samples on a uniform lattice with multilinear interpolation.
///
/// Periodic lattices cover the unit cell [0,1)^dim with `points` samples per
/// axis and wrap around; non-periodic lattices cover [lo, hi]^dim with
/// `points` samples per axis including both ends and clamp outside.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int dim, int points, std::vector<double> values, bool periodic, double lo = 0.0,
          double hi = 1.0);

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  int dim() const { return dim_; }
  int points() const { return points_; }
  bool periodic() const { return periodic_; }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_ = 0;
  int points_ = 0;
  bool periodic_ = true;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> values_;
};

/// Reads a periodic coefficient table: 8-byte magic "MVHOMTAB", u32 N,
/// u32 points-per-axis (little endian), then points^N row-major doubles.
Lattice read_coefficient_table(const std::filesystem::path& path);
void write_coefficient_table(const std::filesystem::path& path, const Lattice& lattice);

}  // namespace mvhom
