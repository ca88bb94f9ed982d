#include "doctest.h"

#include <cmath>
#include <random>

#include "slsg/interp.hpp"
#include "test_support.hpp"

using namespace slsg;
using slsg::testing::naive_sum;
using slsg::testing::random_grid;

namespace {

const BasisFamily kFamilies[] = {
    {1, BoundaryMode::exact}, {2, BoundaryMode::exact}, {3, BoundaryMode::exact},
    {1, BoundaryMode::modified}, {2, BoundaryMode::modified}, {3, BoundaryMode::modified},
};

template <class F>
void fill(AdaptiveSparseGrid& g, F f) {
  for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id) g.values()[id] = f(g.coordinates(id));
  hierarchize(g);
}

Point random_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(d);
  for (double& v : x) v = u(rng);
  return x;
}

// Min/max over the stored nodes of the brute-force cell set.
CellBounds bounds_by_cell(const AdaptiveSparseGrid& g, const Point& x) {
  CellBounds b{1e300, -1e300, false};
  for (const auto& p : nodal_cell(g, x)) {
    MultiLevel l(g.dimension());
    MultiIndex i(g.dimension());
    for (int j = 0; j < g.dimension(); ++j) std::tie(l[j], i[j]) = canonical_1d(p.level[j], p.index[j]);
    const NodeId id = g.find(l, i);
    if (id == kNoNode) continue;
    b.lower = std::min(b.lower, g.values()[id]);
    b.upper = std::max(b.upper, g.values()[id]);
    b.found = true;
  }
  return b;
}

}  // namespace

TEST_CASE("interpolation property at grid points") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& fam : kFamilies) {
    auto g = make_regular_grid(2, 5, fam.mode, fam.order);
    for (double& v : g.values()) v = u(rng);
    hierarchize(g);
    Interpolant itp = Interpolant::snapshot(g);
    double err = 0;
    for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id)
      err = std::max(err, std::abs(itp.evaluate(g.coordinates(id)) - g.values()[id]));
    CAPTURE(family_name(fam));
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("root-only modified linear is constant") {
  auto g = make_regular_grid(3, 3, BoundaryMode::modified);
  g.surpluses()[g.find(MultiLevel(3, 1), MultiIndex(3, 1))] = 1.0;
  Interpolant itp = Interpolant::snapshot(g);
  std::mt19937_64 rng(2);
  for (int s = 0; s < 100; ++s) CHECK(itp.evaluate(random_point(rng, 3)) == 1.0);
  CHECK(itp.evaluate(Point{0.0, 1.0, 0.5}) == 1.0);
}

TEST_CASE("bilinear example matches the naive sum") {
  auto g = make_regular_grid(2, 3, BoundaryMode::exact);
  fill(g, [](const Point& x) { return x[0] * x[1]; });
  Interpolant itp = Interpolant::snapshot(g);
  const Point x{0.3, 0.7};
  CHECK(std::abs(itp.evaluate(x) - naive_sum(g, x)) <= 1e-12);
}

TEST_CASE("tree descent equals naive summation on random grids") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto& fam = kFamilies[rep % 6];
    const int d = 1 + rep % 3;
    auto g = random_grid(rng, d, fam.mode, fam.order, 6, 40 + rep % 50);
    for (double& s : g.surpluses()) s = u(rng);
    Interpolant itp = Interpolant::snapshot(g);
    for (int s = 0; s < 20; ++s) {
      Point x = random_point(rng, d);
      if (s % 5 == 0) x[0] = g.coordinate(static_cast<NodeId>(rng() % g.size()), 0);
      worst = std::max(worst, std::abs(itp.evaluate(x) - naive_sum(g, x)));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("points outside the unit cube are rejected") {
  auto g = make_regular_grid(2, 2, BoundaryMode::exact);
  Interpolant itp = Interpolant::snapshot(g);
  CHECK_THROWS_AS(itp.evaluate(Point{1.1, 0.5}), Error);
  CHECK_THROWS_AS(itp.evaluate(Point{0.5}), Error);
}

TEST_CASE("cell bounds agree with the brute-force cell") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& fam : kFamilies)
    for (int d = 1; d <= 3; ++d) {
      auto g = make_regular_grid(d, 4, fam.mode, fam.order);
      for (double& v : g.values()) v = u(rng);
      hierarchize(g);
      Interpolant itp = Interpolant::snapshot(g, true);
      for (int s = 0; s < 300; ++s) {
        Point x = random_point(rng, d);
        // Exercise lattice coordinates and the domain faces too.
        if (s % 3 == 1) x[0] = std::ldexp(static_cast<double>(rng() % 17), -4);
        if (s % 7 == 2) x[d - 1] = static_cast<double>(rng() % 2);
        const auto a = itp.bounds(x);
        const auto b = bounds_by_cell(g, x);
        REQUIRE(a.found == b.found);
        CHECK(a.lower == b.lower);
        CHECK(a.upper == b.upper);
      }
    }
}

TEST_CASE("cell bounds examples") {
  auto g = make_regular_grid(1, 2, BoundaryMode::modified);
  g.values()[g.find(MultiLevel{2}, MultiIndex{1})] = 0.0;
  g.values()[g.find(MultiLevel{1}, MultiIndex{1})] = 1.0;
  g.values()[g.find(MultiLevel{2}, MultiIndex{3})] = 0.0;
  hierarchize(g);
  Interpolant itp = Interpolant::snapshot(g, true);
  CHECK(itp.evaluate_envelope(Point{0.3}, EnvelopeSide::lower) == 0.0);
  CHECK(itp.evaluate_envelope(Point{0.3}, EnvelopeSide::upper) == 1.0);
  CHECK(itp.evaluate_envelope(Point{0.25}, EnvelopeSide::upper) == 0.0);
  CHECK(itp.evaluate_envelope(Point{0.5}, EnvelopeSide::lower) == 1.0);
}

TEST_CASE("truncation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  SUBCASE("linear truncation is the identity") {
    auto g = make_regular_grid(2, 5, BoundaryMode::exact, 1);
    for (double& v : g.values()) v = u(rng);
    hierarchize(g);
    Interpolant itp = Interpolant::snapshot(g, true);
    for (int s = 0; s < 500; ++s) {
      const Point x = random_point(rng, 2);
      CHECK(itp.evaluate_truncated(x) == itp.evaluate(x));
    }
  }

  SUBCASE("kink: cubic overshoot is clamped") {
    auto g = make_full_grid(1, 5, BoundaryMode::exact, 3);
    fill(g, [](const Point& x) { return std::abs(x[0] - 0.51); });
    Interpolant itp = Interpolant::snapshot(g, true);
    int engaged = 0;
    for (int s = 0; s <= 1000; ++s) {
      const Point x{s / 1000.0};
      bool clamped = false;
      const double t = itp.evaluate_truncated(x, &clamped);
      const auto b = itp.bounds(x);
      CHECK(t >= b.lower);
      CHECK(t <= b.upper);
      engaged += clamped;
    }
    CHECK(engaged > 0);
  }

  SUBCASE("bounds hold on random data and grid points keep their value") {
    for (const auto& fam : kFamilies) {
      if (fam.order == 1) continue;
      for (int d = 1; d <= 3; ++d) {
        auto g = make_regular_grid(d, 4, fam.mode, fam.order);
        for (double& v : g.values()) v = 0.25 + 0.5 * (u(rng) + 1.0);  // data in [0.25, 1.25]
        hierarchize(g);
        Interpolant itp = Interpolant::snapshot(g, true);
        for (int s = 0; s < 10000 / d; ++s) {
          const Point x = random_point(rng, d);
          const double t = itp.evaluate_truncated(x);
          const auto b = itp.bounds(x);
          CHECK(b.lower <= t);
          CHECK(t <= b.upper);
          CHECK(t >= 0.25);
          CHECK(t <= 1.25);
        }
        for (NodeId id = 0; id < static_cast<NodeId>(g.size()); ++id)
          if (g.level_sum(id) == itp.diagonal())
            CHECK(std::abs(itp.evaluate_truncated(g.coordinates(id)) - g.values()[id]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("interpolation convergence orders on a product of sines") {
  auto f = [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
  const double floor_rate[] = {1.8, 2.7, 3.5};
  for (int p = 1; p <= 3; ++p) {
    double err[8] = {};
    for (int n : {4, 7}) {
      auto g = make_regular_grid(2, n, BoundaryMode::exact, p);
      fill(g, f);
      Interpolant itp = Interpolant::snapshot(g);
      for (int a = 0; a <= 100; ++a)
        for (int b = 0; b <= 100; ++b) {
          const Point x{a / 100.0, b / 100.0};
          err[n] = std::max(err[n], std::abs(itp.evaluate(x) - f(x)));
        }
    }
    // err ~ N^-rate log(N)^(d-1) with N = 2^n
    const double rate = std::log2(err[4] / err[7] * (7.0 / 4.0)) / 3.0;
    MESSAGE("p=" << p << " err4=" << err[4] << " err7=" << err[7] << " rate=" << rate);
    CHECK(rate >= floor_rate[p - 1]);
  }
}
