#include "doctest.h"

#include <cmath>
#include <set>

#include <random>
#include <sstream>

#include "slsg/grid.hpp"
#include "slsg/grid_io.hpp"
#include "test_support.hpp"

using namespace slsg;

namespace {

// Independent count of {(l,i): sum of effective levels <= n+d-1}, by direct enumeration of levels.
std::size_t brute_force_count(int d, int n, BoundaryMode mode) {
  std::size_t total = 0;
  std::vector<int> l(d, 1);
  while (true) {
    int s = 0;
    for (int v : l) s += v;
    if (s <= n + d - 1) {
      std::size_t c = 1;
      for (int v : l) {
        std::size_t per = std::size_t{1} << (v - 1);
        if (v == 1 && mode == BoundaryMode::exact) per += 2;
        c *= per;
      }
      total += c;
    }
    int j = 0;
    while (j < d && ++l[j] > n) l[j++] = 1;
    if (j == d) break;
  }
  return total;
}

}  // namespace

TEST_CASE("1D key codes round-trip") {
  for (int l = 1; l <= 12; ++l)
    for (int i = 1; i < (1 << l); i += 2) {
      auto [l2, i2] = decode_1d(encode_1d(l, i));
      CHECK(l2 == l);
      CHECK(i2 == i);
    }
  CHECK(decode_1d(encode_1d(0, 0)) == std::pair{0, 0});
  CHECK(decode_1d(encode_1d(0, 1)) == std::pair{0, 1});
}

TEST_CASE("regular grid counts") {
  CHECK(make_regular_grid(1, 1, BoundaryMode::modified).size() == 1);
  CHECK(make_regular_grid(2, 3, BoundaryMode::modified).size() == 17);
  CHECK(interior_count(make_regular_grid(8, 5, BoundaryMode::modified)) == 6401);
  for (int d = 1; d <= 4; ++d)
    for (int n = 1; n <= 6; ++n)
      for (auto mode : {BoundaryMode::modified, BoundaryMode::exact}) {
        CAPTURE(d);
        CAPTURE(n);
        CHECK(make_regular_grid(d, n, mode).size() == brute_force_count(d, n, mode));
      }
  CHECK(make_regular_grid(2, 7, BoundaryMode::exact).size() == 1281);
  CHECK(make_regular_grid(5, 4, BoundaryMode::modified).size() == 351);
}

TEST_CASE("single root in 1D") {
  auto g = make_regular_grid(1, 1, BoundaryMode::modified);
  CHECK(g.level(0, 0) == 1);
  CHECK(g.index(0, 0) == 1);
  CHECK(g.coordinate(0, 0) == 0.5);
}

TEST_CASE("invalid arguments") {
  CHECK_THROWS_AS(make_regular_grid(0, 3, BoundaryMode::exact), Error);
  CHECK_THROWS_AS(make_regular_grid(2, 0, BoundaryMode::exact), Error);
  AdaptiveSparseGrid g(1, BoundaryMode::modified, 1, 4);
  CHECK_THROWS_AS(g.insert(MultiLevel{2}, MultiIndex{2}), Error);
  CHECK_THROWS_AS(g.insert(MultiLevel{0}, MultiIndex{0}), Error);
  CHECK_THROWS_AS(parse_boundary_mode("open"), Error);
}

TEST_CASE("node coordinates") {
  HierarchicalNode a{MultiLevel{1, 1}, MultiIndex{1, 1}};
  CHECK(node_coordinate(a) == Point{0.5, 0.5});
  HierarchicalNode b{MultiLevel{2}, MultiIndex{3}};
  CHECK(node_coordinate(b)[0] == 0.75);
  HierarchicalNode c{MultiLevel{3, 1}, MultiIndex{5, 1}};
  CHECK(node_coordinate(c) == Point{0.625, 0.5});
}

TEST_CASE("grid invariants: father closure, odd indices, injective coordinates") {
  for (auto mode : {BoundaryMode::modified, BoundaryMode::exact})
    for (int d = 1; d <= 3; ++d) {
      auto g = make_regular_grid(d, 5, mode);
      CHECK(g.father_closed());
      std::set<std::vector<double>> seen;
      for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
        std::vector<double> x;
        for (int j = 0; j < d; ++j) {
          if (g.level(id, j) > 0) CHECK(g.index(id, j) % 2 == 1);
          x.push_back(g.coordinate(id, j));
        }
        seen.insert(x);
      }
      CHECK(seen.size() == g.size());
    }
}

TEST_CASE("links") {
  auto g = make_regular_grid(1, 3, BoundaryMode::exact);
  const NodeId root = g.find(MultiLevel{1}, MultiIndex{1});
  const NodeId left = g.find(MultiLevel{2}, MultiIndex{1});
  const NodeId n33 = g.find(MultiLevel{3}, MultiIndex{3});
  REQUIRE(root != kNoNode);
  CHECK(g.child(root, 0, 0) == left);
  CHECK(g.father(left, 0) == root);
  CHECK(g.father(n33, 0) == left);
  CHECK(g.boundary_sibling(root, 0, 0) == g.find(MultiLevel{0}, MultiIndex{0}));
  CHECK(g.boundary_sibling(root, 0, 1) == g.find(MultiLevel{0}, MultiIndex{1}));
  CHECK(g.is_leaf(n33));
  CHECK_FALSE(g.is_leaf(root));
}

TEST_CASE("hierarchical relatives") {
  auto g = make_regular_grid(1, 3, BoundaryMode::modified);
  auto r = hierarchical_relatives(g, g.find(MultiLevel{2}, MultiIndex{1}), 0);
  CHECK(r.west.coordinate == 0.0);
  CHECK(r.west.node == kNoNode);
  CHECK(r.east.coordinate == 0.5);
  CHECK(r.father.level == 1);
  CHECK(r.father.index == 1);
  CHECK(r.father.node == g.find(MultiLevel{1}, MultiIndex{1}));
  CHECK(r.extended.coordinate == 1.0);

  auto root = hierarchical_relatives(g, g.find(MultiLevel{1}, MultiIndex{1}), 0);
  CHECK_FALSE(root.father.valid);

  auto r33 = hierarchical_relatives(g, g.find(MultiLevel{3}, MultiIndex{3}), 0);
  CHECK(r33.father.level == 2);
  CHECK(r33.father.index == 1);
  CHECK(r33.west.coordinate == 0.25);
  CHECK(r33.east.coordinate == 0.5);
  CHECK(r33.extended.coordinate == 0.0);

  CHECK_THROWS_AS(hierarchical_relatives(g, 0, 1), Error);
}

TEST_CASE("nodal cell") {
  for (auto mode : {BoundaryMode::modified, BoundaryMode::exact}) {
    auto g = make_regular_grid(1, 2, mode);
    auto k = nodal_cell(g, Point{0.3});
    std::set<double> xs;
    for (auto& p : k) xs.insert(coordinate_1d(p.level[0], p.index[0]));
    CHECK(xs == std::set<double>{0.25, 0.5});
    auto on = nodal_cell(g, Point{0.25});
    REQUIRE(on.size() == 1);
    CHECK(coordinate_1d(on[0].level[0], on[0].index[0]) == 0.25);
  }

  // Brute-force support test over all |l|_1 = 3 nodal points in 2D.
  auto g = make_regular_grid(2, 2, BoundaryMode::exact);
  Point x{0.3, 0.3};
  std::set<std::vector<int>> expected;
  for (int l1 = 1; l1 <= 2; ++l1) {
    int l2 = 3 - l1;
    for (int i1 = 0; i1 <= (1 << l1); ++i1)
      for (int i2 = 0; i2 <= (1 << l2); ++i2) {
        double h1 = std::ldexp(1.0, -l1), h2 = std::ldexp(1.0, -l2);
        if (std::abs(x[0] - i1 * h1) < h1 && std::abs(x[1] - i2 * h2) < h2) expected.insert({l1, l2, i1, i2});
      }
  }
  std::set<std::vector<int>> got;
  for (auto& p : nodal_cell(g, x)) got.insert({p.level[0], p.level[1], p.index[0], p.index[1]});
  CHECK(got == expected);
}

TEST_CASE("retain compacts and keeps surpluses") {
  auto g = make_regular_grid(1, 3, BoundaryMode::modified);
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) g.surpluses()[id] = id;
  std::vector<char> keep(g.size(), 1);
  const NodeId drop = g.find(MultiLevel{3}, MultiIndex{7});
  keep[drop] = 0;
  const double s = g.surpluses()[g.find(MultiLevel{3}, MultiIndex{5})];
  g.retain(keep);
  CHECK(g.size() == 6);
  CHECK(g.find(MultiLevel{3}, MultiIndex{7}) == kNoNode);
  CHECK(g.surpluses()[g.find(MultiLevel{3}, MultiIndex{5})] == s);
  CHECK_FALSE(g.linked());
}

TEST_CASE("serialization round trip") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto mode : {BoundaryMode::exact, BoundaryMode::modified}) {
    auto g = slsg::testing::random_grid(rng, 3, mode, 2, 6, 40);
    for (double& v : g.values()) v = u(rng);
    hierarchize(g);
    for (bool text : {false, true}) {
      std::stringstream ss;
      if (text) write_grid_text(g, ss); else write_grid_binary(g, ss);
      auto h = text ? read_grid_text(ss) : read_grid_binary(ss);
      REQUIRE(h.size() == g.size());
      CHECK(h.dimension() == 3);
      CHECK(h.boundary_mode() == mode);
      CHECK(h.basis_order() == 2);
      CHECK(h.max_level() == 6);
      for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
        const NodeId k = h.find(g.key(id));
        REQUIRE(k != kNoNode);
        CHECK(h.surpluses()[k] == g.surpluses()[id]);
        CHECK(std::abs(h.values()[k] - g.values()[id]) < 1e-12);
      }
    }
  }
  std::stringstream bad("2 0 1 3 5\n1 1 1 1 0.5\n");
  CHECK_THROWS_AS(read_grid_text(bad), Error);
}
