#pragma once

#include <functional>
#include <span>

#include "slsg/grid.hpp"

namespace slsg {

/// How dimension adaptation scores a candidate subspace.
enum class SubspaceIndicator { max, sum };

struct AdaptPolicy {
  double eps = 1e-3;
  int max_level = 10;          // bound on effective |l|_inf
  double coarsen_factor = 10;  // leaves below eps / coarsen_factor are removed
  Box refine_box;              // in unit coordinates; empty means the whole cube
  int base_level = 1;          // regular grid that coarsening never goes below
  SubspaceIndicator indicator = SubspaceIndicator::max;

  void validate(int dimension) const;
};

struct AdaptReport {
  std::size_t nodes_added = 0;  // includes fathers_added
  std::size_t nodes_removed = 0;
  std::size_t fathers_added = 0;  // nodes inserted only to restore father-closure
  double max_leaf_surplus = 0.0;
  int passes = 0;  // refine/coarsen sweeps, or subspaces accepted by dimension adaptation
};

/// Computes nodal values for freshly inserted nodes (grid is linked; write grid.values()[id]).
using NodeFiller = std::function<void(AdaptiveSparseGrid& grid, std::span<const NodeId> fresh)>;

/// Largest |surplus| over nodes without any child.
double max_leaf_surplus(const AdaptiveSparseGrid& grid);

/// One refinement sweep: every node with |surplus| > eps inside the refine box gets its missing
/// sons (two per dimension, within max_level), then missing fathers are added. New nodes are
/// valued by `fill` (default: the interpolant of the grid before the pass) and the grid is
/// re-hierarchized.
AdaptReport refine_pass(AdaptiveSparseGrid& grid, const AdaptPolicy& policy, const NodeFiller& fill = {});

/// Repeats refine_pass until it adds nothing (or max_passes is hit).
AdaptReport refine(AdaptiveSparseGrid& grid, const AdaptPolicy& policy, const NodeFiller& fill = {},
                   int max_passes = 64);

/// Removes leaves with |surplus| < eps / coarsen_factor until none qualifies. Nodes of the base
/// regular grid are kept. Remaining surpluses are unchanged.
AdaptReport coarsen(AdaptiveSparseGrid& grid, const AdaptPolicy& policy);

/// Greedy subspace adaptation of a fresh regular grid against f (unit-cube argument): admissible
/// subspaces are added by largest indicator (max or sum of |surplus| over the subspace) until the
/// largest indicator is <= eps.
AdaptReport dimension_adapt_initial(AdaptiveSparseGrid& grid, const std::function<double(const Point&)>& f,
                                    const AdaptPolicy& policy);

}  // namespace slsg
