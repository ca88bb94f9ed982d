#include "slsg/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slsg {

// Per-evaluation scratch: the 1D descent path of every coordinate.
struct Interpolant::Query {
  struct Path {
    int length = 0;  // deepest level on the path
    double phi[kMaxLevel + 1];
    unsigned char side[kMaxLevel + 1];
    double x;
  };
  std::array<Path, kMaxDim> paths;
  unsigned boundary = 0;  // dimensions fixed by the current face
  double sum = 0.0;
  double lower = std::numeric_limits<double>::infinity();
  double upper = -std::numeric_limits<double>::infinity();
  bool found = false;
};

Interpolant::Interpolant(std::shared_ptr<const AdaptiveSparseGrid> grid, bool truncate)
    : grid_(std::move(grid)), truncate_(truncate) {
  if (!grid_) throw Error("interpolant needs a grid");
  if (!grid_->linked()) throw Error("grid links are stale; call relink()");
  if (grid_->size() == 0) throw Error("interpolant over an empty grid");
  const int d = grid_->dimension();
  diagonal_ = grid_->max_level_sum();
  deepest_ = 1;
  for (NodeId id = 0; id < static_cast<NodeId>(grid_->size()); ++id)
    for (int j = 0; j < d; ++j) deepest_ = std::max(deepest_, effective_level(grid_->level(id, j)));
  // Sorting by key keeps the summation order independent of node ids.
  std::vector<std::pair<NodeKey, Face>> faces;
  for (NodeId id = 0; id < static_cast<NodeId>(grid_->size()); ++id) {
    Face f{id, 0, 0};
    bool root = true;
    for (int j = 0; j < d && root; ++j) {
      const int l = grid_->level(id, j);
      if (l == 0) {
        f.boundary |= 1u << j;
        if (grid_->index(id, j) == 1) f.upper |= 1u << j;
      }
      root = l <= 1;
    }
    if (root) faces.emplace_back(grid_->key(id), f);
  }
  std::sort(faces.begin(), faces.end(),
            [](const auto& a, const auto& b) { return a.first.codes < b.first.codes; });
  for (const auto& f : faces) faces_.push_back(f.second);
}

Interpolant Interpolant::snapshot(const AdaptiveSparseGrid& grid, bool truncate) {
  auto copy = std::make_shared<AdaptiveSparseGrid>(grid);
  if (!copy->linked()) copy->relink();
  return Interpolant(std::move(copy), truncate);
}

void Interpolant::check_point(const Point& x) const {
  if (x.size() != grid_->dimension()) throw Error("evaluation point has the wrong dimension");
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw Error("evaluation point outside the unit cube");
}

namespace {

template <int kOrder, bool kModified>
void fill_path(double x, int deepest, int& length, double* phi, unsigned char* side) {
  int index = 1;
  for (int l = 1;; ++l) {
    const double t = x * kPow2[l] - index;
    double v;
    if constexpr (kModified) {
      if (l == 1) {
        v = 1.0;
      } else if (index == 1) {
        v = std::max(0.0, 1.0 - t);
      } else if (index == (1 << l) - 1) {
        v = std::max(0.0, 1.0 + t);
      } else if (kOrder == 1) {
        v = std::max(0.0, 1.0 - std::fabs(t));
      } else if (kOrder == 2 || index == 3 || index == (1 << l) - 3) {
        v = std::fabs(t) < 1.0 ? 1.0 - t * t : 0.0;
      } else {
        v = std::fabs(t) < 1.0 ? detail::cubic_piece(index, t) : 0.0;
      }
    } else {
      if (kOrder == 1) v = std::max(0.0, 1.0 - std::fabs(t));
      else if (kOrder == 2 || l == 1) v = std::fabs(t) < 1.0 ? 1.0 - t * t : 0.0;
      else v = std::fabs(t) < 1.0 ? detail::cubic_piece(index, t) : 0.0;
    }
    phi[l] = v;
    length = l;
    if (l == deepest || t == 0.0 || v == 0.0) break;
    side[l] = t > 0.0;
    index = 2 * index + (t > 0.0 ? 1 : -1);
  }
}

}  // namespace

void Interpolant::prepare(const Point& x, Query& q) const {
  using Fill = void (*)(double, int, int&, double*, unsigned char*);
  static constexpr Fill table[2][3] = {
      {fill_path<1, false>, fill_path<2, false>, fill_path<3, false>},
      {fill_path<1, true>, fill_path<2, true>, fill_path<3, true>},
  };
  const Fill fill = table[grid_->boundary_mode() == BoundaryMode::modified][grid_->basis_order() - 1];
  for (int j = 0; j < grid_->dimension(); ++j) {
    auto& p = q.paths[j];
    p.x = x[j];
    fill(x[j], deepest_, p.length, p.phi, p.side);
  }
}

template <bool kBounds>
void Interpolant::descend(Query& q, NodeId start, int j, double w) const {
  const auto& g = *grid_;
  if (j == g.dimension()) {
    q.sum += w * g.surpluses()[start];
    if constexpr (kBounds) {
      // Cell membership: the node position must be a corner of the level-L cell around x
      // for some level vector L on the finest diagonal.
      const bool modified = g.boundary_mode() == BoundaryMode::modified;
      int lo_sum = 0, hi_sum = 0;
      for (int k = 0; k < g.dimension(); ++k) {
        const int l = g.level(start, k);
        const int i = g.index(start, k);
        const double xk = q.paths[k].x;
        const int lo = effective_level(l);
        int hi = deepest_;
        const double delta = std::fabs(xk - coordinate_1d(l, i));
        if (modified && (xk == 0.0 || xk == 1.0)) {
          // The missing face point snaps to the first interior point of each level.
          hi = i == (xk == 0.0 ? 1 : (1 << l) - 1) ? lo : 0;
        } else if (delta > 0.0) {
          int e;
          std::frexp(delta, &e);
          hi = std::min(hi, -e);
        }
        if (hi < lo) return;
        lo_sum += lo;
        hi_sum += hi;
      }
      if (lo_sum <= diagonal_ && diagonal_ <= hi_sum) {
        const double v = g.values()[start];
        q.lower = std::min(q.lower, v);
        q.upper = std::max(q.upper, v);
        q.found = true;
      }
    }
    return;
  }
  while (j < g.dimension() && (q.boundary >> j) & 1u) ++j;
  if (j == g.dimension()) {
    descend<kBounds>(q, start, j, w);
    return;
  }
  const auto& p = q.paths[j];
  int next = j + 1;
  while (next < g.dimension() && (q.boundary >> next) & 1u) ++next;
  const bool last = !kBounds && next == g.dimension();
  const double* surplus = g.surpluses().data();
  NodeId cur = start;
  if (last) {
    // Innermost dimension: walk the chain without recursing.
    double acc = 0.0;
    for (int l = 1; cur != kNoNode; ++l) {
      const double phi = p.phi[l];
      if (phi == 0.0) break;
      acc += phi * surplus[cur];
      if (l == p.length) break;
      cur = g.child(cur, j, p.side[l]);
    }
    q.sum += w * acc;
    return;
  }
  for (int l = 1; cur != kNoNode; ++l) {
    const double phi = p.phi[l];
    if (phi == 0.0) break;
    descend<kBounds>(q, cur, next, w * phi);
    if (l == p.length) break;
    cur = g.child(cur, j, p.side[l]);
  }
}

template <bool kBounds>
void Interpolant::run(const Point& x, Query& q) const {
  check_point(x);
  prepare(x, q);
  for (const Face& f : faces_) {
    double w = 1.0;
    for (int j = 0; j < grid_->dimension() && w != 0.0; ++j)
      if ((f.boundary >> j) & 1u) w *= (f.upper >> j) & 1u ? x[j] : 1.0 - x[j];
    if (w == 0.0) continue;
    q.boundary = f.boundary;
    descend<kBounds>(q, f.root, 0, w);
  }
}

double Interpolant::evaluate(const Point& x) const {
  Query q;
  run<false>(x, q);
  return q.sum;
}

CellBounds Interpolant::bounds(const Point& x) const {
  Query q;
  run<true>(x, q);
  if (!q.found) return {};
  return {q.lower, q.upper, true};
}

double Interpolant::evaluate_truncated(const Point& x, bool* clamped) const {
  if (clamped) *clamped = false;
  if (grid_->basis_order() == 1) return evaluate(x);
  Query q;
  run<true>(x, q);
  if (!q.found) return q.sum;
  const double v = std::clamp(q.sum, q.lower, q.upper);
  if (clamped) *clamped = v != q.sum;
  return v;
}

double Interpolant::evaluate_envelope(const Point& x, EnvelopeSide side) const {
  Query q;
  run<true>(x, q);
  if (!q.found) return q.sum;
  return side == EnvelopeSide::lower ? q.lower : q.upper;
}

}  // namespace slsg
