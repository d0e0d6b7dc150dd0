#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace mvhom::oracle {

// 1D discrete cell problem with Dirichlet-zero corrector:
//   min (1/t) sum_i h a_i |xi + D_i phi|,  phi_0 = phi_M = 0,
// i.e. min sum_i (a_i / M) |delta_i| subject to sum_i delta_i = M xi with
// delta_i = xi + D_i phi. Its vertices put all of the slope on one cell; the
// oracle enumerates them.
inline double lp_vertex(const std::function<double(double)>& a, int t, int n, double xi) {
  const int cells = t * n;
  const double h = 1.0 / n;
  double best = HUGE_VAL;
  for (int v = 0; v < cells; ++v) {
    double obj = 0.0;
    for (int i = 0; i < cells; ++i) {
      const double delta = i == v ? cells * xi : 0.0;
      obj += a((i + 0.5) * h) * std::abs(delta) / cells;
    }
    best = std::min(best, obj);
  }
  return best;
}

}  // namespace mvhom::oracle
