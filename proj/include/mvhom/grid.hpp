#pragma once

#include <array>
#include <vector>

#include "mvhom/linalg.hpp"

namespace mvhom {

/// Uniform grid with `cells` cells of width h per axis over the cube
/// origin + [0, cells h]^dim. Nodes are numbered row-major, axis 0 slowest.
struct Grid {
  int dim = 1;
  int cells = 1;
  double h = 1.0;
  VecN origin = VecN::Zero(1);

  Grid() = default;
  Grid(int dim_, int cells_, double h_, VecN origin_);

  int nodes_per_axis() const { return cells + 1; }
  long node_count() const;
  long cell_count() const;
  std::array<int, 3> node_multi(long i) const;
  long node_index(const std::array<int, 3>& m) const;
  std::array<int, 3> cell_multi(long c) const;
  VecN node_position(long i) const;
  VecN cell_center(long c) const;
  /// True when the node lies on the boundary of the cube.
  bool on_boundary(long i) const;
};

/// Nodal field on a Grid, valued in R^m (correctors) or on a manifold.
class GridField {
 public:
  GridField() = default;
  GridField(Grid grid, int value_dim, bool on_manifold);

  const Grid& grid() const { return grid_; }
  int value_dim() const { return value_dim_; }
  bool on_manifold() const { return on_manifold_; }
  long size() const { return grid_.node_count(); }

  Vec value(long i) const;
  void set(long i, const Vec& v);
  const std::vector<double>& data() const { return data_; }

 private:
  Grid grid_;
  int value_dim_ = 1;
  bool on_manifold_ = false;
  std::vector<double> data_;
};

}  // namespace mvhom
