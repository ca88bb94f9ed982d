#include "slsg/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "slsg/basis.hpp"
#include "slsg/interp.hpp"

namespace slsg {

void AdaptPolicy::validate(int dimension) const {
  if (!(eps >= 0.0)) throw Error("adaptation precision must be non-negative");
  if (max_level < 1 || max_level > kMaxLevel) throw Error("max level out of range");
  if (!(coarsen_factor >= 0.0)) throw Error("coarsen factor must be non-negative");
  if (refine_box.dimension() != 0) {
    if (refine_box.dimension() != dimension) throw Error("refine box dimension mismatch");
    for (int j = 0; j < dimension; ++j)
      if (refine_box.lower[j] < 0.0 || refine_box.upper[j] > 1.0 || refine_box.lower[j] > refine_box.upper[j])
        throw Error("refine box must lie inside the unit cube");
  }
}

double max_leaf_surplus(const AdaptiveSparseGrid& grid) {
  double m = 0.0;
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id)
    if (grid.is_leaf(id)) m = std::max(m, std::abs(grid.surpluses()[id]));
  return m;
}

namespace {

bool within_levels(const NodeKey& key, int d, int max_level) {
  for (int j = 0; j < d; ++j)
    if (effective_level(decode_1d(key.codes[j]).first) > max_level) return false;
  return true;
}

// Inserts the keys and all their missing fathers; returns the ids of everything new.
std::vector<NodeId> insert_closed(AdaptiveSparseGrid& grid, const std::vector<NodeKey>& keys,
                                  std::size_t& fathers_added) {
  std::vector<NodeId> fresh;
  std::vector<NodeKey> queue;
  for (const auto& k : keys) {
    if (grid.find(k) != kNoNode) continue;
    fresh.push_back(grid.insert_key(k));
    queue.push_back(k);
  }
  std::vector<NodeKey> fathers;
  while (!queue.empty()) {
    const NodeKey k = queue.back();
    queue.pop_back();
    fathers.clear();
    for (int j = 0; j < grid.dimension(); ++j) grid.father_keys(k, j, fathers);
    for (const auto& f : fathers) {
      if (grid.find(f) != kNoNode) continue;
      fresh.push_back(grid.insert_key(f));
      ++fathers_added;
      queue.push_back(f);
    }
  }
  return fresh;
}

void fill_from_snapshot(const Interpolant& itp, AdaptiveSparseGrid& grid, std::span<const NodeId> fresh) {
  for (NodeId id : fresh) grid.values()[id] = itp.evaluate(grid.coordinates(id));
}

}  // namespace

AdaptReport refine_pass(AdaptiveSparseGrid& grid, const AdaptPolicy& policy, const NodeFiller& fill) {
  policy.validate(grid.dimension());
  if (!grid.linked()) grid.relink();
  const int d = grid.dimension();
  AdaptReport report;
  report.passes = 1;
  report.max_leaf_surplus = max_leaf_surplus(grid);

  std::vector<NodeKey> wanted;
  std::vector<NodeKey> kids;
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) {
    if (!(std::abs(grid.surpluses()[id]) > policy.eps)) continue;
    if (policy.refine_box.dimension() != 0 && !policy.refine_box.contains(grid.coordinates(id))) continue;
    for (int j = 0; j < d; ++j) {
      kids.clear();
      grid.child_keys(grid.key(id), j, kids);
      for (const auto& k : kids)
        if (within_levels(k, d, policy.max_level) && grid.find(k) == kNoNode) wanted.push_back(k);
    }
  }
  if (wanted.empty()) return report;

  std::optional<Interpolant> before;
  if (!fill) before.emplace(Interpolant::snapshot(grid));
  const std::vector<NodeId> fresh = insert_closed(grid, wanted, report.fathers_added);
  report.nodes_added = fresh.size();
  grid.relink();
  if (fill)
    fill(grid, fresh);
  else
    fill_from_snapshot(*before, grid, fresh);
  hierarchize(grid);
  return report;
}

AdaptReport refine(AdaptiveSparseGrid& grid, const AdaptPolicy& policy, const NodeFiller& fill, int max_passes) {
  AdaptReport total;
  for (int pass = 0; pass < max_passes; ++pass) {
    const AdaptReport r = refine_pass(grid, policy, fill);
    if (pass == 0) total.max_leaf_surplus = r.max_leaf_surplus;
    total.passes += 1;
    total.nodes_added += r.nodes_added;
    total.fathers_added += r.fathers_added;
    if (r.nodes_added == 0) break;
  }
  return total;
}

AdaptReport coarsen(AdaptiveSparseGrid& grid, const AdaptPolicy& policy) {
  policy.validate(grid.dimension());
  if (!grid.linked()) grid.relink();
  const int d = grid.dimension();
  const int base_sum = policy.base_level + d - 1;
  const double threshold = policy.coarsen_factor > 0.0 ? policy.eps / policy.coarsen_factor : 0.0;
  AdaptReport report;
  report.max_leaf_surplus = max_leaf_surplus(grid);
  while (true) {
    std::vector<char> keep(grid.size(), 1);
    std::size_t removed = 0;
    for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) {
      if (!(std::abs(grid.surpluses()[id]) < threshold) || !grid.is_leaf(id)) continue;
      if (grid.level_sum(id) <= base_sum) continue;
      keep[id] = 0;
      ++removed;
    }
    if (removed == 0) break;
    grid.retain(keep);
    grid.relink();
    report.nodes_removed += removed;
    report.passes += 1;
  }
  return report;
}

AdaptReport dimension_adapt_initial(AdaptiveSparseGrid& grid, const std::function<double(const Point&)>& f,
                                    const AdaptPolicy& policy) {
  policy.validate(grid.dimension());
  const int d = grid.dimension();
  AdaptReport report;
  using Levels = std::vector<int>;

  auto effective_levels = [&](NodeId id) {
    Levels l(d);
    for (int j = 0; j < d; ++j) l[j] = effective_level(grid.level(id, j));
    return l;
  };

  std::set<Levels> active;
  for (NodeId id = 0; id < static_cast<NodeId>(grid.size()); ++id) active.insert(effective_levels(id));
  const std::size_t initial_size = grid.size();

  auto admissible = [&](const Levels& k) {
    for (int j = 0; j < d; ++j) {
      if (k[j] > policy.max_level) return false;
      if (k[j] == 1) continue;
      Levels b = k;
      --b[j];
      if (!active.count(b)) return false;
    }
    return true;
  };

  // Candidate subspaces, each with its nodes inserted and valued from f.
  std::map<Levels, double> candidates;
  std::vector<NodeId> pending;
  auto add_candidates_from = [&](const Levels& from) {
    for (int j = 0; j < d; ++j) {
      Levels k = from;
      ++k[j];
      if (active.count(k) || candidates.count(k) || !admissible(k)) continue;
      candidates[k] = 0.0;
      std::vector<std::vector<std::pair<int, int>>> axes(d);
      for (int a = 0; a < d; ++a) axes[a] = nodes_of_effective_level_1d(k[a], grid.boundary_mode());
      std::vector<std::size_t> pos(d, 0);
      while (true) {
        MultiLevel l(d);
        MultiIndex i(d);
        for (int a = 0; a < d; ++a) std::tie(l[a], i[a]) = axes[a][pos[a]];
        if (grid.find(l, i) == kNoNode) {
          const NodeId id = grid.insert(l, i);
          grid.values()[id] = f(grid.coordinates(id));
          pending.push_back(id);
        }
        int a = 0;
        while (a < d && ++pos[a] == axes[a].size()) pos[a++] = 0;
        if (a == d) break;
      }
    }
  };

  for (NodeId id = 0; id < static_cast<NodeId>(initial_size); ++id) grid.values()[id] = f(grid.coordinates(id));
  for (const auto& l : std::vector<Levels>(active.begin(), active.end())) add_candidates_from(l);

  // Surpluses of a subspace depend only on its ancestors, so indicators never change once computed.
  auto refresh_indicators = [&] {
    grid.relink();
    hierarchize(grid);
    for (auto& [k, ind] : candidates) ind = 0.0;
    for (NodeId id : pending) {
      auto it = candidates.find(effective_levels(id));
      if (it == candidates.end()) continue;
      const double a = std::abs(grid.surpluses()[id]);
      it->second = policy.indicator == SubspaceIndicator::max ? std::max(it->second, a) : it->second + a;
    }
  };
  refresh_indicators();

  while (!candidates.empty()) {
    auto best = candidates.begin();
    for (auto it = candidates.begin(); it != candidates.end(); ++it)
      if (it->second > best->second) best = it;
    if (!(best->second > policy.eps)) break;
    const Levels accepted = best->first;
    ++report.passes;
    candidates.erase(best);
    active.insert(accepted);
    std::erase_if(pending, [&](NodeId id) { return effective_levels(id) == accepted; });
    const std::size_t before = pending.size();
    add_candidates_from(accepted);
    if (pending.size() != before) refresh_indicators();
  }

  // Drop the nodes of rejected candidates.
  std::vector<char> keep(grid.size(), 1);
  for (NodeId id : pending) keep[id] = 0;
  grid.retain(keep);
  grid.relink();
  hierarchize(grid);
  report.nodes_added = grid.size() - initial_size;
  report.max_leaf_surplus = max_leaf_surplus(grid);
  return report;
}

}  // namespace slsg
