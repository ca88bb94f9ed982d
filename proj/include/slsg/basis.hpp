#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "slsg/grid.hpp"

namespace slsg {

/// Polynomial order and boundary treatment of the hierarchical basis.
struct BasisFamily {
  int order = 1;  // 1 linear, 2 quadratic, 3 cubic
  BoundaryMode mode = BoundaryMode::exact;

  static BasisFamily of(const AdaptiveSparseGrid& grid) { return {grid.basis_order(), grid.boundary_mode()}; }
};

std::string family_name(const BasisFamily& family);

/// Which surplus rule produced a coefficient.
enum class SurplusKind { L, Q, C1, C2 };

/// Rule used for the 1D node (l, i) under the given order. Boundary and level-1 nodes are L.
SurplusKind surplus_kind(int order, int level, int index);

namespace detail {

inline double cubic_piece(int index, double t) {
  // Odd positions alternate between the two cubic shapes, mirrored so each vanishes at the
  // far end of its father's support.
  if ((((index - 1) >> 1) & 1) == 0) return (t * t - 1.0) * (t - 3.0) / 3.0;
  return (1.0 - t * t) * (t + 3.0) / 3.0;
}

}  // namespace detail

/// Unchecked 1D basis value; callers guarantee (l, i) is valid for the family.
inline double eval_1d_unchecked(int order, bool modified, int level, int index, double x) {
  if (level == 0) return index == 0 ? 1.0 - x : x;
  if (modified && level == 1) return 1.0;
  const double t = x * kPow2[level] - index;
  const double at = std::fabs(t);
  if (modified) {
    const int last = (1 << level) - 1;
    if (index == 1) return std::max(0.0, 1.0 - t);
    if (index == last) return std::max(0.0, 1.0 + t);
    if (at >= 1.0) return 0.0;
    if (order == 1) return 1.0 - at;
    if (order == 2 || index == 3 || index == last - 2) return 1.0 - t * t;
    return detail::cubic_piece(index, t);
  }
  if (at >= 1.0) return 0.0;
  if (order == 1) return 1.0 - at;
  if (order == 2 || level == 1) return 1.0 - t * t;
  return detail::cubic_piece(index, t);
}

/// Checked 1D basis evaluation; rejects invalid (l, i) and x outside [0, 1].
double eval_1d(const BasisFamily& family, int level, int index, double x);

/// Tensor-product basis value of a stored node at x in [0,1]^d.
double eval_tensor(const AdaptiveSparseGrid& grid, NodeId id, const Point& x);

/// Computes surpluses from grid.values() into grid.surpluses(), one 1D sweep per dimension
/// in order 0..d-1. Exact-boundary grids use the two-neighbour rule with the father
/// corrections for higher orders; modified grids subtract the ancestor contributions directly.
void hierarchize(AdaptiveSparseGrid& grid);

/// Computes grid.values() from grid.surpluses(); inverse of hierarchize up to round-off.
void dehierarchize(AdaptiveSparseGrid& grid);

/// Reference transform: subtract the interpolant of all 1D ancestors, any family.
/// Returns surpluses without touching the grid.
std::vector<double> hierarchize_by_ancestors(const AdaptiveSparseGrid& grid, const std::vector<double>& values);

}  // namespace slsg
