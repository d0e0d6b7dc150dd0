#include "mvhom/grid.hpp"

#include <stdexcept>

namespace mvhom {

Grid::Grid(int dim_, int cells_, double h_, VecN origin_)
    : dim(dim_), cells(cells_), h(h_), origin(std::move(origin_)) {
  if (dim < 1 || dim > kMaxDomain) throw std::invalid_argument("grid dimension out of range");
  if (cells < 1) throw std::invalid_argument("grid needs at least one cell");
  if (origin.size() != dim) throw std::invalid_argument("grid origin has wrong size");
}

long Grid::node_count() const {
  long n = 1;
  for (int j = 0; j < dim; ++j) n *= nodes_per_axis();
  return n;
}

long Grid::cell_count() const {
  long n = 1;
  for (int j = 0; j < dim; ++j) n *= cells;
  return n;
}

std::array<int, 3> Grid::node_multi(long i) const {
  std::array<int, 3> m{0, 0, 0};
  for (int j = dim - 1; j >= 0; --j) {
    m[j] = static_cast<int>(i % nodes_per_axis());
    i /= nodes_per_axis();
  }
  return m;
}

long Grid::node_index(const std::array<int, 3>& m) const {
  long i = 0;
  for (int j = 0; j < dim; ++j) i = i * nodes_per_axis() + m[j];
  return i;
}

std::array<int, 3> Grid::cell_multi(long c) const {
  std::array<int, 3> m{0, 0, 0};
  for (int j = dim - 1; j >= 0; --j) {
    m[j] = static_cast<int>(c % cells);
    c /= cells;
  }
  return m;
}

VecN Grid::node_position(long i) const {
  const auto m = node_multi(i);
  VecN x = origin;
  for (int j = 0; j < dim; ++j) x[j] += h * m[j];
  return x;
}

VecN Grid::cell_center(long c) const {
  const auto m = cell_multi(c);
  VecN x = origin;
  for (int j = 0; j < dim; ++j) x[j] += h * (m[j] + 0.5);
  return x;
}

bool Grid::on_boundary(long i) const {
  const auto m = node_multi(i);
  for (int j = 0; j < dim; ++j) {
    if (m[j] == 0 || m[j] == cells) return true;
  }
  return false;
}

GridField::GridField(Grid grid, int value_dim, bool on_manifold)
    : grid_(std::move(grid)),
      value_dim_(value_dim),
      on_manifold_(on_manifold),
      data_(static_cast<std::size_t>(grid_.node_count() * value_dim), 0.0) {}

Vec GridField::value(long i) const {
  return Eigen::Map<const Eigen::VectorXd>(data_.data() + i * value_dim_, value_dim_);
}

void GridField::set(long i, const Vec& v) {
  for (int k = 0; k < value_dim_; ++k) data_[static_cast<std::size_t>(i * value_dim_ + k)] = v[k];
}

}  // namespace mvhom
