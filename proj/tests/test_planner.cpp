#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/rng.hpp"

using namespace prefcost;

namespace {

PlannerConfig grid8() {
  PlannerConfig c;
  c.mode = PlannerMode::Grid8;
  return c;
}

Costmap random_map(Rng& rng, int rows, int cols, double lo = 0.0, double hi = 1.0) {
  Costmap m(rows, cols);
  for (double& v : m.storage()) v = rng.uniform(lo, hi);
  return m;
}

void expect_well_formed(const LatticePath& p, Pose start, Pose goal, const PlannerConfig& cfg) {
  ASSERT_FALSE(p.poses.empty());
  EXPECT_EQ(p.poses.front(), start);
  EXPECT_EQ(p.poses.back().cell(), goal.cell());
  EXPECT_EQ(p.cells.front(), start.cell());
  EXPECT_EQ(p.cells.back(), goal.cell());
  const double limit = cfg.mode == PlannerMode::Grid8 ? std::sqrt(2.0) : cfg.step_radius * std::sqrt(2.0);
  for (std::size_t i = 1; i < p.poses.size(); ++i)
    EXPECT_LE(std::hypot(p.poses[i].row - p.poses[i - 1].row, p.poses[i].col - p.poses[i - 1].col), limit + 1e-12);
}

}  // namespace

TEST(Segment, MatchesDenseSampling) {
  for (int dr = -6; dr <= 6; ++dr)
    for (int dc = -6; dc <= 6; ++dc) {
      if (!dr && !dc) continue;
      EXPECT_EQ(segment_cells(dr, dc), oracle::dense_cells(dr, dc)) << dr << "," << dc;
    }
}

TEST(Segment, HeadingFiveOfForty) {
  // 45 degrees at radius 3 rounds to (2, 2); heading 4 rounds there too and,
  // being the smaller turn from heading 0, owns the deduplicated primitive.
  EXPECT_EQ(std::lround(3 * std::sin(2 * std::numbers::pi * 5 / 40)), 2);
  EXPECT_EQ(std::lround(3 * std::cos(2 * std::numbers::pi * 5 / 40)), 2);
  const auto prims = lattice_primitives(PlannerConfig{}, 5);
  EXPECT_EQ(prims.front().heading, 5);
  EXPECT_EQ(prims.front().dr, 2);
  EXPECT_EQ(prims.front().dc, 2);
  EXPECT_EQ(prims.front().cells, (std::vector<Cell>{{1, 1}, {2, 2}}));
  EXPECT_EQ(oracle::dense_cells(2, 2), prims.front().cells);

  Costmap m(4, 4, 0.0);
  m(1, 1) = 0.25;
  m(2, 2) = 0.5;
  m(1, 2) = m(2, 1) = 9.0;  // corner-touching, must not count
  const LatticePath p{{{0, 0, 0}, {2, 2, 5}}, {{0, 0}, {1, 1}, {2, 2}}};
  EXPECT_DOUBLE_EQ(path_cost(m, p), 0.75);
}

TEST(Primitives, DedupAndTurnLimits) {
  PlannerConfig cfg;
  const auto all = lattice_primitives(cfg, 0);
  std::set<std::pair<int, int>> offsets;
  for (const auto& p : all) EXPECT_TRUE(offsets.insert({p.dr, p.dc}).second);
  EXPECT_EQ(all.front().heading, 0);
  EXPECT_EQ(all.front().dc, 3);

  cfg.max_turn_bins = 2;
  for (const auto& p : lattice_primitives(cfg, 10)) EXPECT_LE(heading_distance(p.heading, 10, 40), 2);
  EXPECT_EQ(build_successors(cfg).layers, 40);
  cfg.max_turn_bins = 20;
  EXPECT_EQ(build_successors(cfg).layers, 1);
}

TEST(PathCost, Examples) {
  Costmap m(1, 3, std::vector<double>{1, 1, 1});
  EXPECT_DOUBLE_EQ(path_cost(m, {{{0, 0, 0}}, {{0, 1}}}), 1.0);
  EXPECT_DOUBLE_EQ(path_cost(m, {{{0, 0, 0}, {0, 2, 0}}, {{0, 0}, {0, 1}, {0, 2}}}), 3.0);
  m(0, 1) = 0.3;
  EXPECT_DOUBLE_EQ(path_cost(m, {{{0, 1, 0}}, {{0, 1}}}), 0.3);
  EXPECT_THROW(path_cost(m, {{{0, 0, 0}}, {{1, 0}}}), Error);
}

TEST(Plan, StartEqualsGoal) {
  Costmap m(3, 3, 0.7);
  const auto p = plan(m, {1, 1, 3}, {1, 1, 0}, PlannerConfig{});
  EXPECT_EQ(p.poses, (std::vector<Pose>{{1, 1, 3}}));
  EXPECT_DOUBLE_EQ(path_cost(m, p), 0.7);
}

TEST(Plan, Grid8Diagonal) {
  const Costmap m(3, 3, 1.0);
  const auto p = plan(m, {0, 0, 0}, {2, 2, 0}, grid8());
  EXPECT_EQ(p.cells, (std::vector<Cell>{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_DOUBLE_EQ(path_cost(m, p), 3.0);
  EXPECT_EQ(oracle::exhaustive(m, {0, 0}, {2, 2}, grid8()), 3'000'000'000LL);
}

TEST(Plan, Grid8HugsCorridor) {
  Costmap m(7, 7, 10.0);
  for (int i = 0; i < 7; ++i) m(0, i) = m(6, i) = m(i, 0) = m(i, 6) = 0.0;
  const auto p = plan(m, {0, 0, 0}, {6, 6, 0}, grid8());
  for (const Cell& c : p.cells) EXPECT_EQ(m[c], 0.0);
  EXPECT_EQ(path_cost_units(m, p), oracle::dijkstra(m, {0, 0}, 0, {6, 6}, grid8()));
}

TEST(Plan, Errors) {
  Costmap m(5, 5, 1.0);
  try {
    plan(m, {0, 0, 0}, {5, 0, 0}, PlannerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfBounds);
  }
  // A 2x2 map cannot be crossed by radius-3 steps.
  try {
    plan(Costmap(2, 2, 1.0), {0, 0, 0}, {1, 1, 0}, PlannerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoPath);
  }
  m(2, 2) = -1.0;
  EXPECT_THROW(plan(m, {0, 0, 0}, {4, 4, 0}, PlannerConfig{}), Error);
}

TEST(Plan, MatchesDijkstraRandomMaps) {
  Rng rng(99);
  for (int t = 0; t < 30; ++t) {
    const int rows = 4 + static_cast<int>(rng.below(20)), cols = 4 + static_cast<int>(rng.below(20));
    const Costmap m = random_map(rng, rows, cols);
    const Pose s{static_cast<int>(rng.below(rows)), static_cast<int>(rng.below(cols)), static_cast<int>(rng.below(40))};
    const Pose g{static_cast<int>(rng.below(rows)), static_cast<int>(rng.below(cols)), 0};
    for (PlannerConfig cfg : {PlannerConfig{}, grid8()}) {
      const std::int64_t want = oracle::dijkstra(m, s.cell(), s.heading, g.cell(), cfg);
      if (want < 0) {
        EXPECT_THROW(plan(m, s, g, cfg), Error);
        continue;
      }
      PlanStats st;
      const auto p = plan(m, s, g, cfg, &st);
      expect_well_formed(p, s, g, cfg);
      EXPECT_EQ(path_cost_units(m, p), want);
      EXPECT_EQ(st.cost_units, want);
    }
  }
}

TEST(Plan, TurnLimitedMatchesDijkstra) {
  Rng rng(5);
  PlannerConfig cfg;
  cfg.max_turn_bins = 4;
  for (int t = 0; t < 15; ++t) {
    const Costmap m = random_map(rng, 14, 14, 0.1, 1.0);
    const Pose s{static_cast<int>(rng.below(14)), static_cast<int>(rng.below(14)), static_cast<int>(rng.below(40))};
    const Pose g{static_cast<int>(rng.below(14)), static_cast<int>(rng.below(14)), 0};
    const std::int64_t want = oracle::dijkstra(m, s.cell(), s.heading, g.cell(), cfg);
    if (want < 0) {
      EXPECT_THROW(plan(m, s, g, cfg), Error);
      continue;
    }
    const auto p = plan(m, s, g, cfg);
    EXPECT_EQ(path_cost_units(m, p), want);
    for (std::size_t i = 1; i < p.poses.size(); ++i)
      EXPECT_LE(heading_distance(p.poses[i].heading, p.poses[i - 1].heading, 40), 4);
  }
}

TEST(Plan, ExhaustiveFiveByFive) {
  Rng rng(11);
  for (int t = 0; t < 10; ++t) {
    const Costmap m = random_map(rng, 5, 5, 0.5, 1.5);
    for (PlannerConfig cfg : {PlannerConfig{}, grid8()}) {
      const std::int64_t want = oracle::exhaustive(m, {0, 0}, {4, 4}, cfg);
      ASSERT_GT(want, 0);
      EXPECT_EQ(path_cost_units(m, plan(m, {0, 0, 0}, {4, 4, 0}, cfg)), want);
    }
  }
}

TEST(Plan, HeuristicDoesNotChangeCostAndPrunes) {
  Rng rng(4);
  std::size_t astar = 0, dijk = 0;
  for (int t = 0; t < 10; ++t) {
    const Costmap m = random_map(rng, 40, 40, 0.2, 1.0);
    PlanStats a, d;
    plan(m, {0, 0, 0}, {39, 39, 0}, PlannerConfig{}, &a, true);
    plan(m, {0, 0, 0}, {39, 39, 0}, PlannerConfig{}, &d, false);
    EXPECT_EQ(a.cost_units, d.cost_units);
    astar += a.expanded;
    dijk += d.expanded;
  }
  EXPECT_LE(astar, dijk);
}

TEST(Plan, ScaleCovariance) {
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    Costmap m(20, 20);
    for (double& v : m.storage()) v = static_cast<double>(rng.below(1000)) * 1e-3;
    for (double s : {0.25, 2.0, 8.0}) {
      Costmap scaled = m;
      for (double& v : scaled.storage()) v *= s;
      const auto a = plan(m, {1, 2, 0}, {18, 17, 0}, PlannerConfig{});
      const auto b = plan(scaled, {1, 2, 0}, {18, 17, 0}, PlannerConfig{});
      EXPECT_EQ(a, b);
      EXPECT_DOUBLE_EQ(path_cost(scaled, b), s * path_cost(m, a));
    }
  }
}

TEST(Plan, Deterministic) {
  Rng rng(1);
  const Costmap m = random_map(rng, 30, 30);
  EXPECT_EQ(plan(m, {0, 0, 0}, {29, 29, 0}, PlannerConfig{}), plan(m, {0, 0, 0}, {29, 29, 0}, PlannerConfig{}));
  // Uniform map: many optimal paths, always the same one returned.
  const Costmap u(15, 15, 1.0);
  EXPECT_EQ(plan(u, {0, 0, 0}, {14, 9, 0}, grid8()), plan(u, {0, 0, 0}, {14, 9, 0}, grid8()));
}
