#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slsg/types.hpp"

namespace slsg {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Deepest level representable in a node key.
inline constexpr int kMaxLevel = 30;

/// 2^l and 2^-l for l in [0, kMaxLevel + 1], exact in double precision.
inline constexpr auto kPow2 = [] {
  std::array<double, kMaxLevel + 2> p{};
  double v = 1.0;
  for (auto& e : p) e = v, v *= 2.0;
  return p;
}();
inline constexpr auto kInvPow2 = [] {
  std::array<double, kMaxLevel + 2> p{};
  double v = 1.0;
  for (auto& e : p) e = v, v *= 0.5;
  return p;
}();

/// One sparse-grid point as seen from outside the grid.
struct HierarchicalNode {
  MultiLevel level;
  MultiIndex index;
  double surplus = 0.0;
  double nodal_value = 0.0;
  bool is_leaf = true;
};

/// Packs a 1D (level, index) pair: 0 and 1 are the boundary nodes at x=0 and x=1,
/// interior nodes map to their binary-heap position plus one.
std::uint32_t encode_1d(int level, int index);
std::pair<int, int> decode_1d(std::uint32_t code);

/// Canonical hash key of a node: one packed 1D code per dimension.
struct NodeKey {
  std::array<std::uint32_t, kMaxDim> codes{};
  friend bool operator==(const NodeKey&, const NodeKey&) = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& key) const noexcept;
};

NodeKey make_key(const MultiLevel& level, const MultiIndex& index);

/// Reduces a nodal lattice position (level, any index in [0, 2^level]) to the
/// (level, index) of the hierarchical node sitting at that coordinate.
std::pair<int, int> canonical_1d(int level, int index);

/// Coordinate x_{l,i} = 2^-l i of a node, per dimension.
Point node_coordinate(const HierarchicalNode& node);
inline double coordinate_1d(int level, int index) { return index * kInvPow2[level]; }

/// Level used in level-sum and max-level conditions: boundary level 0 counts as level 1,
/// so the 1D level-1 set in exact mode is {0, 0.5, 1}.
inline int effective_level(int level) { return level < 1 ? 1 : level; }

/// The set of active hierarchical nodes, addressed by (level, index), with father/son links.
///
/// Mutation (insert, retain) invalidates the links; call relink() before any navigation or
/// interpolation. Readers are safe concurrently once linked; mutation is single-writer.
class AdaptiveSparseGrid {
public:
  AdaptiveSparseGrid(int dimension, BoundaryMode mode, int basis_order, int max_level);

  int dimension() const { return dim_; }
  BoundaryMode boundary_mode() const { return mode_; }
  int basis_order() const { return order_; }
  int max_level() const { return max_level_; }
  void set_max_level(int max_level);
  std::size_t size() const { return keys_.size(); }

  /// Inserts the node if absent and returns its id; validates level/index against the mode.
  NodeId insert(const MultiLevel& level, const MultiIndex& index, double nodal_value = 0.0);
  NodeId insert_key(const NodeKey& key, double nodal_value = 0.0);

  NodeId find(const MultiLevel& level, const MultiIndex& index) const;
  NodeId find(const NodeKey& key) const;
  bool contains(const MultiLevel& level, const MultiIndex& index) const {
    return find(level, index) != kNoNode;
  }

  const NodeKey& key(NodeId id) const { return keys_[id]; }
  int level(NodeId id, int j) const { return level_[static_cast<std::size_t>(id) * dim_ + j]; }
  int index(NodeId id, int j) const { return index_[static_cast<std::size_t>(id) * dim_ + j]; }
  MultiLevel levels(NodeId id) const;
  MultiIndex indices(NodeId id) const;
  double coordinate(NodeId id, int j) const { return coordinate_1d(level(id, j), index(id, j)); }
  Point coordinates(NodeId id) const;
  int level_sum(NodeId id) const;  // effective levels
  int max_level_sum() const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& surpluses() { return surplus_; }
  const std::vector<double>& surpluses() const { return surplus_; }

  HierarchicalNode node(NodeId id) const;

  /// Rebuilds father, child and boundary links after mutation.
  void relink();
  bool linked() const { return linked_; }

  /// Direct hierarchical father along dimension j (interior levels >= 2 only).
  NodeId father(NodeId id, int j) const { return father_[static_cast<std::size_t>(id) * dim_ + j]; }
  /// Child along dimension j; side 0 is the left son, side 1 the right son. For a boundary
  /// node (level 0) both sides refer to the level-1 node of that dimension.
  NodeId child(NodeId id, int j, int side) const {
    return child_[(static_cast<std::size_t>(id) * dim_ + j) * 2 + side];
  }
  /// For a node at level 1 in dimension j (exact mode): the boundary nodes at 0 (side 0) and 1 (side 1).
  NodeId boundary_sibling(NodeId id, int j, int side) const {
    return bsib_[(static_cast<std::size_t>(id) * dim_ + j) * 2 + side];
  }
  bool is_leaf(NodeId id) const;

  /// Keys of the direct fathers of a node in dimension j: one interior father for level >= 2,
  /// the two boundary nodes for level 1 in exact mode, nothing otherwise.
  void father_keys(const NodeKey& key, int j, std::vector<NodeKey>& out) const;
  /// Keys of the sons of a node in dimension j (not necessarily present).
  void child_keys(const NodeKey& key, int j, std::vector<NodeKey>& out) const;

  /// Keeps only nodes with keep[id] != 0, compacting ids (order preserved). Unlinks.
  void retain(std::span<const char> keep);

  /// True when every node's fathers in every dimension are present.
  bool father_closed() const;

  void for_each_node(const std::function<void(NodeId)>& fn) const {
    for (NodeId id = 0; id < static_cast<NodeId>(size()); ++id) fn(id);
  }

private:
  void validate(const MultiLevel& level, const MultiIndex& index) const;

  int dim_;
  BoundaryMode mode_;
  int order_;
  int max_level_;

  std::vector<NodeKey> keys_;
  std::vector<std::uint8_t> level_;
  std::vector<std::int32_t> index_;
  std::vector<double> values_;
  std::vector<double> surplus_;
  std::unordered_map<NodeKey, NodeId, NodeKeyHash> lookup_;

  bool linked_ = false;
  std::vector<NodeId> father_;
  std::vector<NodeId> child_;
  std::vector<NodeId> bsib_;
};

/// Regular sparse grid V_n: all nodes with effective |l|_1 <= n + d - 1.
AdaptiveSparseGrid make_regular_grid(int d, int n, BoundaryMode mode, int basis_order = 1, int max_level = -1);

/// Full grid: all nodes with effective |l|_inf <= max_level.
AdaptiveSparseGrid make_full_grid(int d, int max_level, BoundaryMode mode, int basis_order = 1);

/// Enumerates the 1D nodes (level, index) of a given effective level.
std::vector<std::pair<int, int>> nodes_of_effective_level_1d(int effective_level, BoundaryMode mode);

/// Number of interior nodes (no level-0 entries).
std::size_t interior_count(const AdaptiveSparseGrid& grid);

/// A relative of a node along one dimension; `node` is kNoNode when the relative is not stored
/// (a boundary position in modified mode, or a point outside the current grid).
struct Relative {
  NodeId node = kNoNode;
  int level = -1;
  int index = -1;
  double coordinate = 0.0;
  bool valid = false;  // false when no such relative exists at all (e.g. father of a root)
};

struct Relatives {
  Relative father;
  Relative west;
  Relative east;
  Relative extended;  // far end of the father's support (ee)
};

Relatives hierarchical_relatives(const AdaptiveSparseGrid& grid, NodeId node, int dim);

/// A point of a nodal basis: level with indices in [0, 2^l] (not reduced to odd form).
struct NodalPoint {
  MultiLevel level;
  MultiIndex index;
};

/// Nodal points of the finest diagonal (|l|_1 = grid.max_level_sum(), no entry above the deepest
/// stored level) whose support contains x.
/// Per axis, a coordinate on the level lattice selects only that lattice point, otherwise both
/// ends of the enclosing cell; indices without a node (modified mode edges) snap inward.
std::vector<NodalPoint> nodal_cell(const AdaptiveSparseGrid& grid, const Point& x);

}  // namespace slsg
