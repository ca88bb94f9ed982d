#include "slsg/basis.hpp"

#include <algorithm>
#include <array>

namespace slsg {

std::string family_name(const BasisFamily& family) {
  static const char* names[] = {"linear", "quadratic", "cubic"};
  return std::string(names[family.order - 1]) + "/" + to_string(family.mode);
}

SurplusKind surplus_kind(int order, int level, int index) {
  if (order == 1 || level < 2) return SurplusKind::L;
  if (order == 2 || level < 3) return SurplusKind::Q;
  const int r = index % 8;
  return (r == 1 || r == 7) ? SurplusKind::C1 : SurplusKind::C2;
}

double eval_1d(const BasisFamily& family, int level, int index, double x) {
  if (family.order < 1 || family.order > 3) throw Error("basis order must be 1, 2 or 3");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("basis evaluation point outside [0, 1]");
  if (level == 0) {
    if (family.mode != BoundaryMode::exact) throw Error("boundary functions exist only in exact mode");
    if (index != 0 && index != 1) throw Error("boundary index must be 0 or 1");
  } else if (level < 0 || level > kMaxLevel || index < 1 || index >= (1 << level) || index % 2 == 0) {
    throw Error("invalid basis function (" + std::to_string(level) + ", " + std::to_string(index) + ")");
  }
  return eval_1d_unchecked(family.order, family.mode == BoundaryMode::modified, level, index, x);
}

double eval_tensor(const AdaptiveSparseGrid& grid, NodeId id, const Point& x) {
  const bool modified = grid.boundary_mode() == BoundaryMode::modified;
  double v = 1.0;
  for (int j = 0; j < grid.dimension() && v != 0.0; ++j)
    v *= eval_1d_unchecked(grid.basis_order(), modified, grid.level(id, j), grid.index(id, j), x[j]);
  return v;
}

namespace {

constexpr int kMaxChain = kMaxLevel + 2;

struct Chain {
  std::array<NodeId, kMaxChain> ids;
  int size = 0;
};

// All 1D ancestors of a node along dimension j, nearest first, boundary nodes last.
Chain ancestors(const AdaptiveSparseGrid& grid, NodeId id, int j) {
  Chain c;
  const int l = grid.level(id, j);
  if (l == 0) return c;
  NodeId a = id;
  while (grid.level(a, j) > 1) {
    a = grid.father(a, j);
    if (a == kNoNode) throw Error("grid is not father-closed; hierarchization needs every 1D father");
    c.ids[c.size++] = a;
  }
  if (grid.boundary_mode() == BoundaryMode::exact) {
    for (int side = 0; side < 2; ++side) {
      const NodeId b = grid.boundary_sibling(a, j, side);
      if (b == kNoNode) throw Error("exact-boundary grid is missing a boundary node");
      c.ids[c.size++] = b;
    }
  }
  return c;
}

// Node ids sorted by level along dimension j (stable).
std::vector<NodeId> order_by_level(const AdaptiveSparseGrid& grid, int j) {
  std::array<std::size_t, kMaxLevel + 2> count{};
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) ++count[grid.level(id, j) + 1];
  for (int l = 1; l < kMaxLevel + 2; ++l) count[l] += count[l - 1];
  std::vector<NodeId> out(grid.size());
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) out[count[grid.level(id, j)]++] = id;
  return out;
}

void ensure_linked(const AdaptiveSparseGrid& grid) {
  if (!grid.linked()) throw Error("grid links are stale; call relink()");
}

// In place: data holds nodal values along dim j on entry, surpluses on exit.
void sweep_by_ancestors(const AdaptiveSparseGrid& grid, int j, std::vector<double>& data) {
  const int p = grid.basis_order();
  const bool modified = grid.boundary_mode() == BoundaryMode::modified;
  for (NodeId m : order_by_level(grid, j)) {
    if (grid.level(m, j) == 0) continue;
    const double x = grid.coordinate(m, j);
    const Chain c = ancestors(grid, m, j);
    double acc = 0.0;
    for (int k = 0; k < c.size; ++k) {
      const NodeId a = c.ids[k];
      acc += data[a] * eval_1d_unchecked(p, modified, grid.level(a, j), grid.index(a, j), x);
    }
    data[m] -= acc;
  }
}

// Exact-boundary sweep: linear surplus from the two support ends, then father corrections.
void sweep_by_recurrence(const AdaptiveSparseGrid& grid, int j, std::vector<double>& data) {
  const std::size_t n = grid.size();
  const int p = grid.basis_order();
  std::vector<double> alpha(n);
  for (NodeId m = 0; m < static_cast<NodeId>(n); ++m) {
    const int l = grid.level(m, j);
    if (l == 0) {
      alpha[m] = data[m];
      continue;
    }
    const double west = coordinate_1d(l, grid.index(m, j) - 1);
    const double east = coordinate_1d(l, grid.index(m, j) + 1);
    const Chain c = ancestors(grid, m, j);
    double vw = 0.0, ve = 0.0;
    int found = 0;
    for (int k = 0; k < c.size && found < 2; ++k) {
      const double xa = grid.coordinate(c.ids[k], j);
      if (xa == west) vw = data[c.ids[k]], ++found;
      else if (xa == east) ve = data[c.ids[k]], ++found;
    }
    alpha[m] = data[m] - 0.5 * (vw + ve);
  }
  if (p >= 2) {
    std::vector<double> q = alpha;
    for (NodeId m = 0; m < static_cast<NodeId>(n); ++m)
      if (grid.level(m, j) >= 2) q[m] = alpha[m] - 0.25 * alpha[grid.father(m, j)];
    alpha.swap(q);
  }
  if (p == 3) {
    std::vector<double> c = alpha;
    for (NodeId m = 0; m < static_cast<NodeId>(n); ++m) {
      const int l = grid.level(m, j);
      if (l < 3) continue;
      const double corr = 0.125 * alpha[grid.father(m, j)];
      c[m] = surplus_kind(p, l, grid.index(m, j)) == SurplusKind::C1 ? alpha[m] - corr : alpha[m] + corr;
    }
    alpha.swap(c);
  }
  data.swap(alpha);
}

}  // namespace

void hierarchize(AdaptiveSparseGrid& grid) {
  if (!grid.linked()) grid.relink();
  std::vector<double> data = grid.values();
  for (int j = 0; j < grid.dimension(); ++j) {
    if (grid.boundary_mode() == BoundaryMode::exact)
      sweep_by_recurrence(grid, j, data);
    else
      sweep_by_ancestors(grid, j, data);
  }
  grid.surpluses() = std::move(data);
}

std::vector<double> hierarchize_by_ancestors(const AdaptiveSparseGrid& grid, const std::vector<double>& values) {
  ensure_linked(grid);
  if (values.size() != grid.size()) throw Error("value count does not match grid size");
  std::vector<double> data = values;
  for (int j = 0; j < grid.dimension(); ++j) sweep_by_ancestors(grid, j, data);
  return data;
}

void dehierarchize(AdaptiveSparseGrid& grid) {
  if (!grid.linked()) grid.relink();
  const int p = grid.basis_order();
  const bool modified = grid.boundary_mode() == BoundaryMode::modified;
  std::vector<double> data = grid.surpluses();
  std::vector<double> out(data.size());
  for (int j = grid.dimension() - 1; j >= 0; --j) {
    for (NodeId m = 0; m < static_cast<NodeId>(grid.size()); ++m) {
      const double x = grid.coordinate(m, j);
      const Chain c = ancestors(grid, m, j);
      double acc = data[m];
      for (int k = 0; k < c.size; ++k) {
        const NodeId a = c.ids[k];
        acc += data[a] * eval_1d_unchecked(p, modified, grid.level(a, j), grid.index(a, j), x);
      }
      out[m] = acc;
    }
    data.swap(out);
  }
  grid.values() = std::move(data);
}

}  // namespace slsg
