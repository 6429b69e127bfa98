#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"
#include "prefcost/masks.hpp"
#include "prefcost/planner.hpp"

namespace prefcost {

struct MaeBreakdown {
  double total = 0.0;
  std::map<ClassId, double> per_class;
  std::map<ClassId, double> class_fractions;
};

/// Pixel-wise mean absolute error, overall and restricted to each mask.
inline MaeBreakdown mae(const Costmap& predicted, const Costmap& target, const SegmentationMaskSet& masks) {
  if (!same_shape(predicted, target) || !same_shape(predicted, masks.labels()))
    fail(ErrorCode::DimensionMismatch, "mae inputs differ in size");
  MaeBreakdown out;
  if (predicted.empty()) return out;
  std::vector<double> sums(static_cast<std::size_t>(masks.count()), 0.0);
  double total = 0.0;
  const auto& labels = masks.labels().storage();
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = std::abs(predicted.storage()[i] - target.storage()[i]);
    total += e;
    sums[static_cast<std::size_t>(labels[i])] += e;
  }
  const double n = static_cast<double>(predicted.size());
  out.total = total / n;
  for (int m = 0; m < masks.count(); ++m) {
    const double area = static_cast<double>(masks.area(m));
    const ClassId id = masks.class_of_mask(m);
    out.class_fractions[id] = area / n;
    out.per_class[id] = area > 0 ? sums[static_cast<std::size_t>(m)] / area : 0.0;
  }
  return out;
}

namespace detail {
inline double directed_hausdorff(const std::vector<Pose>& from, const std::vector<Pose>& to) {
  double worst = 0.0;
  for (const Pose& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Pose& b : to) best = std::min(best, std::hypot(a.row - b.row, a.col - b.col));
    worst = std::max(worst, best);
  }
  return worst;
}
}  // namespace detail

/// Symmetric Hausdorff distance between the pose positions of two paths.
inline double hausdorff(const LatticePath& a, const LatticePath& b) {
  if (a.poses.empty() || b.poses.empty()) fail(ErrorCode::EmptyPath, "hausdorff of an empty path");
  return std::max(detail::directed_hausdorff(a.poses, b.poses), detail::directed_hausdorff(b.poses, a.poses));
}

struct RegretPair {
  double rho_star = 0.0;  // extra ground-truth cost of the predicted path
  double rho_hat = 0.0;   // extra predicted cost the model assigns the ground-truth path
};

/// ρ* = C̄(Γ) − C̄(Γ̄) and ρ̂ = C(Γ̄) − C(Γ), with Γ̄ planned on the ground
/// truth and Γ on the prediction. Differences are taken in fixed point.
inline RegretPair regret(const Costmap& gt_costmap, const Costmap& pred_costmap, const LatticePath& gt_path,
                         const LatticePath& pred_path) {
  if (gt_path.poses.empty() || pred_path.poses.empty()) fail(ErrorCode::EmptyPath, "regret of an empty path");
  if (!(gt_path.poses.front().cell() == pred_path.poses.front().cell()) ||
      !(gt_path.poses.back().cell() == pred_path.poses.back().cell()))
    fail(ErrorCode::GraphMismatch, "paths do not share start and goal");
  if (!same_shape(gt_costmap, pred_costmap)) fail(ErrorCode::DimensionMismatch, "costmaps differ in size");
  RegretPair r;
  r.rho_star = from_units(path_cost_units(gt_costmap, pred_path) - path_cost_units(gt_costmap, gt_path));
  r.rho_hat = from_units(path_cost_units(pred_costmap, gt_path) - path_cost_units(pred_costmap, pred_path));
  return r;
}

}  // namespace prefcost
