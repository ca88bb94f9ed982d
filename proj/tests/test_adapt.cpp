#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "slsg/adapt.hpp"
#include "slsg/basis.hpp"
#include "slsg/interp.hpp"

using namespace slsg;

namespace {

using Fn = double (*)(const Point&);

void fill(AdaptiveSparseGrid& g, Fn f) {
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) g.values()[id] = f(g.coordinates(id));
  hierarchize(g);
}

NodeFiller exact_filler(Fn f) {
  return [f](AdaptiveSparseGrid& g, std::span<const NodeId> fresh) {
    for (NodeId id : fresh) g.values()[id] = f(g.coordinates(id));
  };
}

// A kink on a dyadic point is reproduced exactly by every family, so it sits off the lattice.
double kink(const Point& x) { return std::abs(x[0] - 1.0 / 3.0); }
double smooth2(const Point& x) { return std::exp(0.7 * x[0] + 1.3 * x[1]) + 0.1 * x[0] * x[1] * x[1]; }

std::set<std::vector<std::uint32_t>> key_set(const AdaptiveSparseGrid& g) {
  std::set<std::vector<std::uint32_t>> s;
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const auto& k = g.key(id).codes;
    s.insert(std::vector<std::uint32_t>(k.begin(), k.begin() + g.dimension()));
  }
  return s;
}

}  // namespace

TEST_CASE("refine_pass examples") {
  SUBCASE("nothing above eps") {
    auto g = make_regular_grid(2, 3, BoundaryMode::exact);
    fill(g, smooth2);
    AdaptPolicy p{1e6, 8};
    const auto before = g.size();
    CHECK(refine_pass(g, p).nodes_added == 0);
    CHECK(g.size() == before);
  }
  SUBCASE("1D root with surplus 2 eps") {
    auto g = make_regular_grid(1, 1, BoundaryMode::modified, 1, 2);
    g.values()[0] = 2e-3;
    hierarchize(g);
    AdaptPolicy p{1e-3, 2};
    const auto r = refine_pass(g, p);
    CHECK(r.nodes_added == 2);
    CHECK(g.find(MultiLevel{2}, MultiIndex{1}) != kNoNode);
    CHECK(g.find(MultiLevel{2}, MultiIndex{3}) != kNoNode);
    CHECK(refine_pass(g, p).nodes_added == 0);  // level cap
  }
}

TEST_CASE("refinement concentrates around a kink") {
  auto g = make_regular_grid(1, 3, BoundaryMode::exact, 2, 12);
  fill(g, kink);
  AdaptPolicy p{1e-4, 12};
  std::size_t last = g.size();
  for (int pass = 0; pass < 40; ++pass) {
    const auto r = refine_pass(g, p, exact_filler(kink));
    CHECK(g.father_closed());
    CHECK(g.size() >= last);
    last = g.size();
    if (r.nodes_added == 0) break;
  }
  CHECK(refine_pass(g, p, exact_filler(kink)).nodes_added == 0);
  CHECK(g.size() < 100);  // full level 12 has 4097 points
  int deepest = 0;
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
    const int l = g.level(id, 0);
    deepest = std::max(deepest, l);
    // The quadratic stencil reaches three cells, so the band is a few cells wide.
    if (l >= 6) CHECK(std::abs(g.coordinate(id, 0) - 1.0 / 3.0) < std::ldexp(1.0, 3 - l));
  }
  CHECK(deepest == 12);
}

TEST_CASE("coarsening") {
  auto g = make_regular_grid(1, 3, BoundaryMode::exact, 2, 12);
  fill(g, kink);
  AdaptPolicy p{1e-4, 12};
  p.base_level = 3;
  refine(g, p, exact_filler(kink));
  const std::size_t refined = g.size();

  SUBCASE("huge threshold returns to the base grid") {
    AdaptPolicy big = p;
    big.eps = 1e6;
    const auto r = coarsen(g, big);
    CHECK(r.nodes_removed == refined - 9);
    CHECK(key_set(g) == key_set(make_regular_grid(1, 3, BoundaryMode::exact)));
  }
  SUBCASE("leaves at or above the threshold stay") {
    auto s = make_regular_grid(2, 3, BoundaryMode::modified, 1, 7);
    fill(s, smooth2);
    AdaptPolicy q{1e-5, 7};
    q.base_level = 2;
    refine(s, q, exact_filler(smooth2));
    double smallest = 1e300;
    for (NodeId id = 0; id < static_cast<NodeId>(s.size()); ++id)
      if (s.is_leaf(id)) smallest = std::min(smallest, std::abs(s.surpluses()[id]));
    REQUIRE(smallest > 0.0);
    q.eps = smallest * q.coarsen_factor;
    CHECK(coarsen(s, q).nodes_removed == 0);
  }
  SUBCASE("deep nodes near the kink survive, surpluses unchanged") {
    std::map<std::uint32_t, double> by_key;
    for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) by_key[g.key(id).codes[0]] = g.surpluses()[id];
    coarsen(g, p);
    CHECK(g.father_closed());
    CHECK(g.size() < refined);
    int deepest = 0;
    for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
      deepest = std::max(deepest, g.level(id, 0));
      CHECK(g.surpluses()[id] == by_key[g.key(id).codes[0]]);
      if (g.level(id, 0) >= 5) CHECK(std::abs(g.coordinate(id, 0) - 1.0 / 3.0) < std::ldexp(1.0, 2 - g.level(id, 0)));
    }
    CHECK(deepest >= 6);
  }
}

TEST_CASE("coarsening removes far deep nodes of a sharp bump") {
  auto bump = [](const Point& x) { return std::exp(-400 * (x[0] - 0.3) * (x[0] - 0.3)); };
  auto g = make_regular_grid(1, 3, BoundaryMode::modified, 1, 10);
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) g.values()[id] = bump(g.coordinates(id));
  hierarchize(g);
  AdaptPolicy p{1e-6, 10};
  p.base_level = 3;
  refine(g, p, [&](AdaptiveSparseGrid& gr, std::span<const NodeId> fresh) {
    for (NodeId id : fresh) gr.values()[id] = bump(gr.coordinates(id));
  });
  AdaptPolicy c = p;
  c.eps = 1e-4;
  coarsen(g, c);
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id)
    if (g.level(id, 0) >= 7) CHECK(std::abs(g.coordinate(id, 0) - 0.3) < 0.2);
}

TEST_CASE("full coverage: eps = 0 reaches the full grid") {
  for (auto mode : {BoundaryMode::exact, BoundaryMode::modified}) {
    auto g = make_regular_grid(2, 3, mode, 1, 5);
    fill(g, smooth2);
    AdaptPolicy p{0.0, 5};
    refine(g, p, exact_filler(smooth2));
    CHECK(key_set(g) == key_set(make_full_grid(2, 5, mode)));
  }
}

TEST_CASE("refine box restricts refinement") {
  auto g = make_regular_grid(2, 2, BoundaryMode::modified, 1, 6);
  fill(g, smooth2);
  AdaptPolicy p{0.0, 6};
  p.refine_box = Box{Point{0.0, 0.0}, Point{0.4, 1.0}};
  refine(g, p, exact_filler(smooth2));
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id)
    if (g.level(id, 0) >= 3) CHECK(g.coordinate(id, 0) < 0.5);
  CHECK_THROWS_AS(refine_pass(g, AdaptPolicy{0.0, 6, 10, Box{Point{-0.1, 0}, Point{1, 1}}}), Error);
}

TEST_CASE("dimension adaptation") {
  SUBCASE("constant function stops at once") {
    auto g = make_regular_grid(2, 1, BoundaryMode::modified, 1, 8);
    const auto r = dimension_adapt_initial(g, [](const Point&) { return 3.0; }, AdaptPolicy{1e-8, 8});
    CHECK(r.nodes_added == 0);
    CHECK(g.size() == 1);
  }
  SUBCASE("function of x only refines along x") {
    auto g = make_regular_grid(2, 2, BoundaryMode::exact, 1, 8);
    auto f = [](const Point& x) { return std::sin(3 * x[0]) + x[0] * x[0]; };
    dimension_adapt_initial(g, f, AdaptPolicy{1e-6, 8});
    CHECK(g.father_closed());
    int max0 = 0, max1 = 0;
    for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) {
      max0 = std::max(max0, effective_level(g.level(id, 0)));
      max1 = std::max(max1, effective_level(g.level(id, 1)));
      if (effective_level(g.level(id, 1)) >= 2) CHECK(std::abs(g.surpluses()[id]) < 1e-12);
    }
    CHECK(max0 == 8);
    CHECK(max1 == 2);  // only the initial regular grid reaches level 2 in y
  }
  SUBCASE("tiny eps contains the regular grid") {
    auto g = make_regular_grid(2, 2, BoundaryMode::exact, 1, 5);
    auto f = [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
    dimension_adapt_initial(g, f, AdaptPolicy{1e-14, 5});
    const auto got = key_set(g);
    for (const auto& k : key_set(make_regular_grid(2, 5, BoundaryMode::exact))) CHECK(got.count(k) == 1);
  }
}
