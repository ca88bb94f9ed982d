#pragma once

#include <memory>

#include "slsg/basis.hpp"
#include "slsg/grid.hpp"

namespace slsg {

enum class EnvelopeSide { lower, upper };

/// Min and max nodal value over the finest-diagonal cell points around x that are stored.
struct CellBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool found = false;  // false when no such point is stored
};

/// Sparse interpolant over an immutable grid snapshot (values and surpluses current).
class Interpolant {
public:
  explicit Interpolant(std::shared_ptr<const AdaptiveSparseGrid> grid, bool truncate = false);

  /// Copies the grid; the interpolant stays valid while the original is mutated.
  static Interpolant snapshot(const AdaptiveSparseGrid& grid, bool truncate = false);

  const AdaptiveSparseGrid& grid() const { return *grid_; }
  std::shared_ptr<const AdaptiveSparseGrid> grid_ptr() const { return grid_; }
  BasisFamily family() const { return BasisFamily::of(*grid_); }
  bool truncation() const { return truncate_; }
  /// Finest diagonal level sum used by the cell bounds.
  int diagonal() const { return diagonal_; }

  /// Sum of surplus times basis value over the nodes whose support holds x.
  double evaluate(const Point& x) const;

  /// evaluate() clamped to the cell bounds; identical to evaluate() for linear bases.
  /// Sets *clamped when the clamp changed the value.
  double evaluate_truncated(const Point& x, bool* clamped = nullptr) const;

  double evaluate_envelope(const Point& x, EnvelopeSide side) const;

  CellBounds bounds(const Point& x) const;

  /// The value used by the scheme: truncated when truncation is on.
  double operator()(const Point& x, bool* clamped = nullptr) const {
    return truncate_ ? evaluate_truncated(x, clamped) : evaluate(x);
  }

private:
  struct Query;
  void check_point(const Point& x) const;
  void prepare(const Point& x, Query& q) const;
  template <bool kBounds>
  void descend(Query& q, NodeId start, int j, double w) const;
  // A face fixes some coordinates on the boundary; its root has level 1 in all other dimensions.
  struct Face {
    NodeId root;
    unsigned boundary;  // bit j set: dimension j sits on the boundary
    unsigned upper;     // bit j set: ... at x_j = 1
  };
  template <bool kBounds>
  void run(const Point& x, Query& q) const;

  std::shared_ptr<const AdaptiveSparseGrid> grid_;
  bool truncate_;
  int diagonal_;
  int deepest_;
  std::vector<Face> faces_;
};

}  // namespace slsg
