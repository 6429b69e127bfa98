#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <queue>
#include <vector>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"

namespace prefcost {

struct Pose {
  int row = 0;
  int col = 0;
  int heading = 0;  // bin index, 2π/headings radians each
  Cell cell() const noexcept { return {row, col}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Poses visited plus every cell the connecting segments pass through, in
/// order. The start cell is first; a cell re-entered later appears again.
struct LatticePath {
  std::vector<Pose> poses;
  std::vector<Cell> cells;
  friend bool operator==(const LatticePath&, const LatticePath&) = default;
};

enum class PlannerMode { Lattice, Grid8 };

struct PlannerConfig {
  int headings = 40;
  double step_radius = 3.0;
  int max_turn_bins = 40;
  PlannerMode mode = PlannerMode::Lattice;

  void validate() const {
    if (headings < 4) fail(ErrorCode::InvalidArgument, "need at least 4 headings");
    if (!std::isfinite(step_radius) || step_radius < 1.0) fail(ErrorCode::InvalidArgument, "step radius must be >= 1");
    if (max_turn_bins < 0) fail(ErrorCode::InvalidArgument, "max_turn_bins must be >= 0");
  }

  /// True when every heading reaches every other in one step.
  bool turns_unconstrained() const noexcept { return mode == PlannerMode::Grid8 || 2 * max_turn_bins >= headings; }
};

/// Path costs are summed in fixed point so that equal-cost comparisons,
/// A*/Dijkstra agreement and regret signs are exact.
inline constexpr double kCostQuantum = 1e-9;
inline constexpr double kMaxCellCost = 1e6;

using CostUnits = std::int64_t;

inline CostUnits to_units(double cost) {
  if (!std::isfinite(cost) || cost < 0.0) fail(ErrorCode::InvalidArgument, "planner costs must be finite and >= 0");
  if (cost > kMaxCellCost) fail(ErrorCode::InvalidArgument, "cell cost exceeds planner range");
  return static_cast<CostUnits>(std::llround(cost / kCostQuantum));
}

inline double from_units(CostUnits units) { return static_cast<double>(units) * kCostQuantum; }

/// Cells whose interior the segment between two cell centres crosses,
/// excluding the origin and ending at (dr, dc). A segment passing exactly
/// through a grid corner steps diagonally there.
inline std::vector<Cell> segment_cells(int dr, int dc) {
  std::vector<Cell> out;
  const int nr = std::abs(dr), nc = std::abs(dc);
  const int sr = dr < 0 ? -1 : 1, sc = dc < 0 ? -1 : 1;
  int ir = 0, ic = 0;
  // Boundary crossing "times" compared in integers: (2i+1)/(2n).
  while (ir < nr || ic < nc) {
    const long long tc = ic < nc ? static_cast<long long>(2 * ic + 1) * nr : std::numeric_limits<long long>::max();
    const long long tr = ir < nr ? static_cast<long long>(2 * ir + 1) * nc : std::numeric_limits<long long>::max();
    if (tc == tr) {
      ++ir;
      ++ic;
    } else if (tc < tr) {
      ++ic;
    } else {
      ++ir;
    }
    out.push_back({sr * ir, sc * ic});
  }
  return out;
}

struct MotionPrimitive {
  int dr = 0;
  int dc = 0;
  int heading = 0;          // heading after the move
  std::vector<Cell> cells;  // offsets entered, last is (dr, dc)
};

inline int heading_distance(int a, int b, int headings) {
  const int d = std::abs(a - b) % headings;
  return std::min(d, headings - d);
}

/// Successor primitives from heading `from`. Headings are tried in order of
/// turn size then index; the first heading producing a given offset keeps it.
inline std::vector<MotionPrimitive> lattice_primitives(const PlannerConfig& cfg, int from) {
  std::vector<int> order;
  for (int i = 0; i < cfg.headings; ++i)
    if (cfg.turns_unconstrained() || heading_distance(i, from, cfg.headings) <= cfg.max_turn_bins) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return heading_distance(a, from, cfg.headings) < heading_distance(b, from, cfg.headings);
  });
  std::vector<MotionPrimitive> out;
  for (int i : order) {
    const double theta = 2.0 * std::numbers::pi * i / cfg.headings;
    const int dc = static_cast<int>(std::lround(cfg.step_radius * std::cos(theta)));
    const int dr = static_cast<int>(std::lround(cfg.step_radius * std::sin(theta)));
    const bool seen = std::any_of(out.begin(), out.end(), [&](const MotionPrimitive& p) { return p.dr == dr && p.dc == dc; });
    if (!seen) out.push_back({dr, dc, i, segment_cells(dr, dc)});
  }
  return out;
}

inline std::vector<MotionPrimitive> grid8_primitives(const PlannerConfig& cfg) {
  static constexpr int kOffsets[8][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
  std::vector<MotionPrimitive> out;
  for (const auto& o : kOffsets) {
    const double angle = std::atan2(static_cast<double>(o[0]), static_cast<double>(o[1]));
    int h = static_cast<int>(std::lround(angle / (2.0 * std::numbers::pi) * cfg.headings));
    h = ((h % cfg.headings) + cfg.headings) % cfg.headings;
    out.push_back({o[0], o[1], h, {{o[0], o[1]}}});
  }
  return out;
}

/// Primitive table indexed by search layer. Layers collapse to one when the
/// successor set does not depend on the incoming heading.
struct SuccessorTable {
  int layers = 1;
  std::vector<std::vector<MotionPrimitive>> by_layer;
  double max_step_length = 0.0;
  std::size_t min_cells_per_step = 0;
};

inline SuccessorTable build_successors(const PlannerConfig& cfg) {
  cfg.validate();
  SuccessorTable t;
  if (cfg.mode == PlannerMode::Grid8) {
    t.by_layer.push_back(grid8_primitives(cfg));
  } else if (cfg.turns_unconstrained()) {
    t.by_layer.push_back(lattice_primitives(cfg, 0));
  } else {
    t.layers = cfg.headings;
    for (int j = 0; j < cfg.headings; ++j) t.by_layer.push_back(lattice_primitives(cfg, j));
  }
  t.min_cells_per_step = std::numeric_limits<std::size_t>::max();
  for (const auto& layer : t.by_layer)
    for (const auto& p : layer) {
      t.max_step_length = std::max(t.max_step_length, std::hypot(p.dr, p.dc));
      t.min_cells_per_step = std::min(t.min_cells_per_step, p.cells.size());
    }
  return t;
}

inline CostUnits path_cost_units(const Costmap& costmap, const LatticePath& path) {
  CostUnits total = 0;
  for (const Cell& c : path.cells) {
    if (!costmap.contains(c)) fail(ErrorCode::OutOfBounds, "path leaves the costmap");
    total += to_units(costmap[c]);
  }
  return total;
}

/// Sum of the costmap over the path's traversed cells.
inline double path_cost(const Costmap& costmap, const LatticePath& path) {
  return from_units(path_cost_units(costmap, path));
}

struct PlanStats {
  std::size_t expanded = 0;
  CostUnits cost_units = 0;
};

/// A* over (cell, heading layer). With `use_heuristic` false it is Dijkstra.
///
/// The heuristic is (Euclidean distance / longest primitive) × fewest cells
/// entered per primitive × cheapest cell; it is consistent, so the first goal
/// pop is optimal. Equal f pops the lowest g, then the lowest heading, then
/// the first cell in row-major order. The goal heading is free.
inline LatticePath plan(const Costmap& costmap, Pose start, Pose goal, const PlannerConfig& cfg,
                        PlanStats* stats = nullptr, bool use_heuristic = true) {
  cfg.validate();
  if (!costmap.contains(start.cell()) || !costmap.contains(goal.cell()))
    fail(ErrorCode::OutOfBounds, "start or goal outside the costmap");
  if (start.heading < 0 || start.heading >= cfg.headings) fail(ErrorCode::OutOfBounds, "start heading out of range");

  const SuccessorTable table = build_successors(cfg);
  const int rows = costmap.rows(), cols = costmap.cols();
  std::vector<CostUnits> units(costmap.size());
  CostUnits min_units = std::numeric_limits<CostUnits>::max();
  for (std::size_t i = 0; i < units.size(); ++i) {
    units[i] = to_units(costmap.storage()[i]);
    min_units = std::min(min_units, units[i]);
  }

  if (start.cell() == goal.cell()) {
    if (stats) *stats = {0, units[costmap.index(start.row, start.col)]};
    return {{start}, {start.cell()}};
  }

  const double h_scale = use_heuristic
                             ? static_cast<double>(table.min_cells_per_step) * static_cast<double>(min_units) / table.max_step_length
                             : 0.0;
  auto heuristic = [&](int r, int c) { return h_scale * std::hypot(r - goal.row, c - goal.col); };

  const std::size_t layers = static_cast<std::size_t>(table.layers);
  const std::size_t n_states = costmap.size() * layers;
  constexpr CostUnits kInf = std::numeric_limits<CostUnits>::max();
  std::vector<CostUnits> g(n_states, kInf);
  std::vector<std::int64_t> parent(n_states, -1);
  std::vector<int> via(n_states, -1);     // primitive index into parent's layer
  std::vector<int> heading(n_states, 0);  // reported heading of the pose
  std::vector<bool> closed(n_states, false);

  struct Entry {
    double f;
    CostUnits g;
    int heading;
    std::size_t cell;
    std::size_t state;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    if (a.heading != b.heading) return a.heading > b.heading;
    return a.cell > b.cell;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);

  const int start_layer = table.layers == 1 ? 0 : start.heading;
  const std::size_t start_cell = costmap.index(start.row, start.col);
  const std::size_t s0 = start_cell * layers + static_cast<std::size_t>(start_layer);
  g[s0] = units[start_cell];
  heading[s0] = start.heading;
  open.push({static_cast<double>(g[s0]) + heuristic(start.row, start.col), g[s0], start.heading, start_cell, s0});

  std::size_t expanded = 0;
  std::int64_t found = -1;
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (closed[e.state] || e.g != g[e.state]) continue;
    closed[e.state] = true;
    ++expanded;
    const int r = static_cast<int>(e.cell / static_cast<std::size_t>(cols));
    const int c = static_cast<int>(e.cell % static_cast<std::size_t>(cols));
    if (r == goal.row && c == goal.col) {
      found = static_cast<std::int64_t>(e.state);
      break;
    }
    const auto& prims = table.by_layer[e.state % layers];
    for (std::size_t pi = 0; pi < prims.size(); ++pi) {
      const MotionPrimitive& p = prims[pi];
      const int nr = r + p.dr, nc = c + p.dc;
      if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
      CostUnits step = 0;
      for (const Cell& off : p.cells) step += units[costmap.index(r + off.row, c + off.col)];
      const std::size_t ncell = costmap.index(nr, nc);
      const std::size_t layer = table.layers == 1 ? 0 : static_cast<std::size_t>(p.heading);
      const std::size_t ns = ncell * layers + layer;
      if (closed[ns]) continue;
      const CostUnits ng = e.g + step;
      if (ng < g[ns]) {
        g[ns] = ng;
        parent[ns] = static_cast<std::int64_t>(e.state);
        via[ns] = static_cast<int>(pi);
        heading[ns] = p.heading;
        open.push({static_cast<double>(ng) + heuristic(nr, nc), ng, p.heading, ncell, ns});
      }
    }
  }
  if (found < 0) fail(ErrorCode::NoPath, "goal unreachable under the motion model");

  std::vector<std::size_t> chain;
  for (std::int64_t s = found; s >= 0; s = parent[static_cast<std::size_t>(s)]) chain.push_back(static_cast<std::size_t>(s));
  std::reverse(chain.begin(), chain.end());

  LatticePath path;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const std::size_t s = chain[i];
    const std::size_t cell = s / layers;
    const Pose pose{static_cast<int>(cell / static_cast<std::size_t>(cols)), static_cast<int>(cell % static_cast<std::size_t>(cols)), heading[s]};
    if (i == 0) {
      path.cells.push_back(pose.cell());
    } else {
      const Pose& prev = path.poses.back();
      const auto& p = table.by_layer[chain[i - 1] % layers][static_cast<std::size_t>(via[s])];
      for (const Cell& off : p.cells) path.cells.push_back({prev.row + off.row, prev.col + off.col});
    }
    path.poses.push_back(pose);
  }
  if (stats) *stats = {expanded, g[static_cast<std::size_t>(found)]};
  return path;
}

}  // namespace prefcost
