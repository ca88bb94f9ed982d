#include "slsg/grid.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <cmath>

namespace slsg {

std::string to_string(BoundaryMode mode) { return mode == BoundaryMode::exact ? "exact" : "modified"; }

BoundaryMode parse_boundary_mode(const std::string& text) {
  if (text == "exact") return BoundaryMode::exact;
  if (text == "modified") return BoundaryMode::modified;
  throw Error("unknown boundary mode '" + text + "' (expected exact|modified)");
}

std::uint32_t encode_1d(int level, int index) {
  if (level == 0) return static_cast<std::uint32_t>(index);
  return (1u << (level - 1)) + static_cast<std::uint32_t>(index >> 1) + 1u;
}

std::pair<int, int> decode_1d(std::uint32_t code) {
  if (code < 2) return {0, static_cast<int>(code)};
  const std::uint32_t heap = code - 1;
  const int level = std::bit_width(heap);
  const int index = static_cast<int>(2 * (heap - (1u << (level - 1))) + 1);
  return {level, index};
}

std::size_t NodeKeyHash::operator()(const NodeKey& key) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (std::uint32_t c : key.codes) {
    h ^= c + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
  }
  return static_cast<std::size_t>(h ^ (h >> 33));
}

NodeKey make_key(const MultiLevel& level, const MultiIndex& index) {
  NodeKey key;
  for (int j = 0; j < level.size(); ++j) key.codes[j] = encode_1d(level[j], index[j]);
  return key;
}

std::pair<int, int> canonical_1d(int level, int index) {
  if (index == 0) return {0, 0};
  if (index == (1 << level)) return {0, 1};
  while ((index & 1) == 0) {
    index >>= 1;
    --level;
  }
  return {level, index};
}


Point node_coordinate(const HierarchicalNode& node) {
  Point x(node.level.size());
  for (int j = 0; j < x.size(); ++j) x[j] = coordinate_1d(node.level[j], node.index[j]);
  return x;
}

AdaptiveSparseGrid::AdaptiveSparseGrid(int dimension, BoundaryMode mode, int basis_order, int max_level)
    : dim_(dimension), mode_(mode), order_(basis_order), max_level_(max_level) {
  if (dimension < 1 || dimension > kMaxDim)
    throw Error("grid dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (basis_order < 1 || basis_order > 3) throw Error("basis order must be 1, 2 or 3");
  if (max_level < 1 || max_level > kMaxLevel) throw Error("max level must lie in [1, 30]");
}

void AdaptiveSparseGrid::set_max_level(int max_level) {
  if (max_level < 1 || max_level > kMaxLevel) throw Error("max level must lie in [1, 30]");
  max_level_ = max_level;
}

void AdaptiveSparseGrid::validate(const MultiLevel& level, const MultiIndex& index) const {
  if (level.size() != dim_ || index.size() != dim_) throw Error("node dimension mismatch");
  for (int j = 0; j < dim_; ++j) {
    const int l = level[j];
    const int i = index[j];
    if (l == 0) {
      if (mode_ != BoundaryMode::exact) throw Error("level-0 boundary nodes require exact boundary mode");
      if (i != 0 && i != 1) throw Error("boundary node index must be 0 or 1");
    } else {
      if (l < 0 || l > kMaxLevel) throw Error("level out of range");
      if (i < 1 || i >= (1 << l) || (i & 1) == 0)
        throw Error("index " + std::to_string(i) + " is not an odd index of level " + std::to_string(l));
    }
  }
}

NodeId AdaptiveSparseGrid::insert(const MultiLevel& level, const MultiIndex& index, double nodal_value) {
  validate(level, index);
  return insert_key(make_key(level, index), nodal_value);
}

NodeId AdaptiveSparseGrid::insert_key(const NodeKey& key, double nodal_value) {
  const auto [it, inserted] = lookup_.try_emplace(key, static_cast<NodeId>(keys_.size()));
  if (!inserted) return it->second;
  keys_.push_back(key);
  for (int j = 0; j < dim_; ++j) {
    const auto [l, i] = decode_1d(key.codes[j]);
    level_.push_back(static_cast<std::uint8_t>(l));
    index_.push_back(i);
  }
  values_.push_back(nodal_value);
  surplus_.push_back(0.0);
  linked_ = false;
  return it->second;
}

NodeId AdaptiveSparseGrid::find(const MultiLevel& level, const MultiIndex& index) const {
  if (level.size() != dim_ || index.size() != dim_) return kNoNode;
  return find(make_key(level, index));
}

NodeId AdaptiveSparseGrid::find(const NodeKey& key) const {
  const auto it = lookup_.find(key);
  return it == lookup_.end() ? kNoNode : it->second;
}

MultiLevel AdaptiveSparseGrid::levels(NodeId id) const {
  MultiLevel l(dim_);
  for (int j = 0; j < dim_; ++j) l[j] = level(id, j);
  return l;
}

MultiIndex AdaptiveSparseGrid::indices(NodeId id) const {
  MultiIndex i(dim_);
  for (int j = 0; j < dim_; ++j) i[j] = index(id, j);
  return i;
}

Point AdaptiveSparseGrid::coordinates(NodeId id) const {
  Point x(dim_);
  for (int j = 0; j < dim_; ++j) x[j] = coordinate(id, j);
  return x;
}

int AdaptiveSparseGrid::level_sum(NodeId id) const {
  int s = 0;
  for (int j = 0; j < dim_; ++j) s += effective_level(level(id, j));
  return s;
}

int AdaptiveSparseGrid::max_level_sum() const {
  int m = 0;
  for (NodeId id = 0; id < static_cast<NodeId>(size()); ++id) m = std::max(m, level_sum(id));
  return m;
}

HierarchicalNode AdaptiveSparseGrid::node(NodeId id) const {
  HierarchicalNode n;
  n.level = levels(id);
  n.index = indices(id);
  n.surplus = surplus_[id];
  n.nodal_value = values_[id];
  n.is_leaf = linked_ ? is_leaf(id) : true;
  return n;
}

void AdaptiveSparseGrid::father_keys(const NodeKey& key, int j, std::vector<NodeKey>& out) const {
  const auto [l, i] = decode_1d(key.codes[j]);
  if (l == 0) return;
  if (l == 1) {
    if (mode_ == BoundaryMode::exact) {
      NodeKey k = key;
      k.codes[j] = 0;
      out.push_back(k);
      k.codes[j] = 1;
      out.push_back(k);
    }
    return;
  }
  const int up = (i + 1) / 2;
  const int father_index = (up & 1) ? up : (i - 1) / 2;
  NodeKey k = key;
  k.codes[j] = encode_1d(l - 1, father_index);
  out.push_back(k);
}

void AdaptiveSparseGrid::child_keys(const NodeKey& key, int j, std::vector<NodeKey>& out) const {
  const auto [l, i] = decode_1d(key.codes[j]);
  NodeKey k = key;
  if (l == 0) {
    k.codes[j] = encode_1d(1, 1);
    out.push_back(k);
    return;
  }
  if (l >= kMaxLevel) return;
  k.codes[j] = encode_1d(l + 1, 2 * i - 1);
  out.push_back(k);
  k.codes[j] = encode_1d(l + 1, 2 * i + 1);
  out.push_back(k);
}

void AdaptiveSparseGrid::relink() {
  const std::size_t n = size();
  father_.assign(n * dim_, kNoNode);
  child_.assign(n * dim_ * 2, kNoNode);
  bsib_.assign(n * dim_ * 2, kNoNode);
  for (NodeId id = 0; id < static_cast<NodeId>(n); ++id) {
    for (int j = 0; j < dim_; ++j) {
      const std::size_t slot = static_cast<std::size_t>(id) * dim_ + j;
      const int l = level(id, j);
      const int i = index(id, j);
      NodeKey k = keys_[id];
      if (l == 0) {
        k.codes[j] = encode_1d(1, 1);
        const NodeId root = find(k);
        child_[slot * 2] = root;
        child_[slot * 2 + 1] = root;
        continue;
      }
      if (l >= 2) {
        const int up = (i + 1) / 2;
        k.codes[j] = encode_1d(l - 1, (up & 1) ? up : (i - 1) / 2);
        father_[slot] = find(k);
      } else if (mode_ == BoundaryMode::exact) {
        k.codes[j] = 0;
        bsib_[slot * 2] = find(k);
        k.codes[j] = 1;
        bsib_[slot * 2 + 1] = find(k);
      }
      if (l < kMaxLevel) {
        k.codes[j] = encode_1d(l + 1, 2 * i - 1);
        child_[slot * 2] = find(k);
        k.codes[j] = encode_1d(l + 1, 2 * i + 1);
        child_[slot * 2 + 1] = find(k);
      }
    }
  }
  linked_ = true;
}

bool AdaptiveSparseGrid::is_leaf(NodeId id) const {
  if (!linked_) throw Error("grid links are stale; call relink()");
  for (int j = 0; j < dim_; ++j)
    if (child(id, j, 0) != kNoNode || child(id, j, 1) != kNoNode) return false;
  return true;
}

void AdaptiveSparseGrid::retain(std::span<const char> keep) {
  if (keep.size() != size()) throw Error("retain mask size mismatch");
  AdaptiveSparseGrid out(dim_, mode_, order_, max_level_);
  for (NodeId id = 0; id < static_cast<NodeId>(size()); ++id) {
    if (!keep[id]) continue;
    const NodeId nid = out.insert_key(keys_[id], values_[id]);
    out.surplus_[nid] = surplus_[id];
  }
  *this = std::move(out);
}

bool AdaptiveSparseGrid::father_closed() const {
  std::vector<NodeKey> fathers;
  for (NodeId id = 0; id < static_cast<NodeId>(size()); ++id) {
    for (int j = 0; j < dim_; ++j) {
      fathers.clear();
      father_keys(keys_[id], j, fathers);
      for (const auto& f : fathers)
        if (find(f) == kNoNode) return false;
    }
  }
  return true;
}

std::vector<std::pair<int, int>> nodes_of_effective_level_1d(int effective, BoundaryMode mode) {
  std::vector<std::pair<int, int>> out;
  if (effective == 1) {
    if (mode == BoundaryMode::exact) {
      out.emplace_back(0, 0);
      out.emplace_back(0, 1);
    }
    out.emplace_back(1, 1);
    return out;
  }
  for (int i = 1; i < (1 << effective); i += 2) out.emplace_back(effective, i);
  return out;
}

namespace {

// Inserts the tensor product of the 1D node sets of one effective multi-level.
void insert_subspace(AdaptiveSparseGrid& grid, const std::vector<int>& eff) {
  const int d = grid.dimension();
  std::vector<std::vector<std::pair<int, int>>> axes(d);
  for (int j = 0; j < d; ++j) axes[j] = nodes_of_effective_level_1d(eff[j], grid.boundary_mode());
  std::vector<std::size_t> pos(d, 0);
  MultiLevel l(d);
  MultiIndex i(d);
  while (true) {
    for (int j = 0; j < d; ++j) {
      l[j] = axes[j][pos[j]].first;
      i[j] = axes[j][pos[j]].second;
    }
    grid.insert(l, i);
    int j = 0;
    while (j < d && ++pos[j] == axes[j].size()) pos[j++] = 0;
    if (j == d) break;
  }
}

template <class Accept>
void enumerate_levels(int d, int max_entry, Accept accept, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> eff(d, 1);
  while (true) {
    if (accept(eff)) fn(eff);
    int j = 0;
    while (j < d && ++eff[j] > max_entry) eff[j++] = 1;
    if (j == d) break;
  }
}

}  // namespace

AdaptiveSparseGrid make_regular_grid(int d, int n, BoundaryMode mode, int basis_order, int max_level) {
  if (d <= 0) throw Error("make_regular_grid: dimension must be positive");
  if (n <= 0) throw Error("make_regular_grid: level must be positive");
  AdaptiveSparseGrid grid(d, mode, basis_order, max_level < 0 ? n : max_level);
  const int budget = n + d - 1;
  enumerate_levels(
      d, n,
      [&](const std::vector<int>& eff) {
        int s = 0;
        for (int v : eff) s += v;
        return s <= budget;
      },
      [&](const std::vector<int>& eff) { insert_subspace(grid, eff); });
  grid.relink();
  return grid;
}

AdaptiveSparseGrid make_full_grid(int d, int max_level, BoundaryMode mode, int basis_order) {
  if (d <= 0 || max_level <= 0) throw Error("make_full_grid: dimension and level must be positive");
  AdaptiveSparseGrid grid(d, mode, basis_order, max_level);
  enumerate_levels(
      d, max_level, [](const std::vector<int>&) { return true; },
      [&](const std::vector<int>& eff) { insert_subspace(grid, eff); });
  grid.relink();
  return grid;
}

std::size_t interior_count(const AdaptiveSparseGrid& grid) {
  std::size_t count = 0;
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) {
    bool interior = true;
    for (int j = 0; j < grid.dimension(); ++j) interior = interior && grid.level(id, j) > 0;
    count += interior;
  }
  return count;
}

namespace {

Relative relative_at(const AdaptiveSparseGrid& grid, NodeId node, int dim, int lattice_level, int lattice_index) {
  Relative r;
  r.valid = true;
  const auto [l, i] = canonical_1d(lattice_level, lattice_index);
  r.level = l;
  r.index = i;
  r.coordinate = coordinate_1d(l, i);
  if (l == 0 && grid.boundary_mode() == BoundaryMode::modified) return r;
  NodeKey k = grid.key(node);
  k.codes[dim] = encode_1d(l, i);
  r.node = grid.find(k);
  return r;
}

}  // namespace

Relatives hierarchical_relatives(const AdaptiveSparseGrid& grid, NodeId node, int dim) {
  if (dim < 0 || dim >= grid.dimension()) throw Error("hierarchical_relatives: dimension out of range");
  if (node < 0 || node >= static_cast<NodeId>(grid.size())) throw Error("hierarchical_relatives: unknown node");
  Relatives out;
  const int l = grid.level(node, dim);
  const int i = grid.index(node, dim);
  if (l == 0) return out;
  out.west = relative_at(grid, node, dim, l, i - 1);
  out.east = relative_at(grid, node, dim, l, i + 1);
  if (l == 1) return out;
  // The direct father is whichever support end sits exactly one level up.
  const bool father_is_east = (((i + 1) / 2) & 1) != 0;
  out.father = father_is_east ? out.east : out.west;
  out.extended = father_is_east ? relative_at(grid, node, dim, l, i + 3) : relative_at(grid, node, dim, l, i - 3);
  return out;
}

std::vector<NodalPoint> nodal_cell(const AdaptiveSparseGrid& grid, const Point& x) {
  const int d = grid.dimension();
  if (x.size() != d) throw Error("nodal_cell: point dimension mismatch");
  const int diag = grid.max_level_sum();
  const bool exact = grid.boundary_mode() == BoundaryMode::exact;
  int deepest = 1;
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id)
    for (int k = 0; k < d; ++k) deepest = std::max(deepest, effective_level(grid.level(id, k)));
  std::vector<NodalPoint> out;
  std::vector<int> l(d, 1);
  // Enumerate all multi-levels with entries >= 1 summing to diag.
  std::function<void(int, int)> rec = [&](int j, int remaining) {
    if (j == d - 1) {
      l[j] = remaining;
      if (remaining < 1 || remaining > deepest) return;
      std::array<std::array<int, 2>, kMaxDim> cand{};
      std::array<int, kMaxDim> ncand{};
      for (int k = 0; k < d; ++k) {
        const int lk = l[k];
        const double scaled = std::ldexp(x[k], lk);
        const int top = 1 << lk;
        double fl = std::floor(scaled);
        int lo = static_cast<int>(fl);
        if (lo >= top) lo = top;
        if (fl == scaled) {
          cand[k][0] = lo;
          ncand[k] = 1;
        } else {
          cand[k][0] = lo;
          cand[k][1] = lo + 1;
          ncand[k] = 2;
        }
        if (!exact) {
          for (int c = 0; c < ncand[k]; ++c) cand[k][c] = std::clamp(cand[k][c], 1, top - 1);
          if (ncand[k] == 2 && cand[k][0] == cand[k][1]) ncand[k] = 1;
        }
      }
      std::array<int, kMaxDim> pos{};
      while (true) {
        NodalPoint p{MultiLevel(d), MultiIndex(d)};
        for (int k = 0; k < d; ++k) {
          p.level[k] = l[k];
          p.index[k] = cand[k][pos[k]];
        }
        out.push_back(p);
        int k = 0;
        while (k < d && ++pos[k] == ncand[k]) pos[k++] = 0;
        if (k == d) break;
      }
      return;
    }
    for (int v = 1; v <= std::min(deepest, remaining - (d - 1 - j)); ++v) {
      l[j] = v;
      rec(j + 1, remaining - v);
    }
  };
  rec(0, diag);
  return out;
}

}  // namespace slsg
