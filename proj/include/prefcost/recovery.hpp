#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"
#include "prefcost/masks.hpp"
#include "prefcost/preference.hpp"

namespace prefcost {

enum class LossMode { L1Only, L2Only, Combined };

inline constexpr double kDefaultLambda = 0.2;
inline constexpr double kDefaultHuberDelta = 1.0;
inline constexpr double kUnreferencedClassCost = 0.5;

struct LossConfig {
  LossMode mode = LossMode::Combined;
  double lambda = kDefaultLambda;
  double huber_delta = kDefaultHuberDelta;
  std::optional<Costmap> prior;  // L2 anchor

  void validate() const {
    if (!std::isfinite(lambda) || lambda <= 0.0) fail(ErrorCode::InvalidArgument, "lambda must be finite and > 0");
    if (!std::isfinite(huber_delta) || huber_delta <= 0.0) fail(ErrorCode::InvalidArgument, "huber delta must be > 0");
    if (mode != LossMode::L1Only && !prior) fail(ErrorCode::MissingPrior, "L2 term needs a prior costmap");
  }
};

struct LossValue {
  double total = 0.0;
  double l1 = 0.0;  // preference-consistency term
  double l2 = 0.0;  // per-cell anchor term (mean over cells)
};

struct SolveReport {
  ClassCosts class_costs;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double r, double delta) { return std::clamp(r, -delta, delta); }

namespace detail {

struct ResolvedPreference {
  int preferred_mask;
  int other_mask;
  double target;  // log-odds Δ
};

inline std::vector<ResolvedPreference> resolve(const SegmentationMaskSet& masks, const PreferenceContext& context) {
  std::vector<ResolvedPreference> out;
  out.reserve(context.size());
  for (const auto& p : context) {
    validate(p);
    out.push_back({masks.mask_of(p.preferred), masks.mask_of(p.other), logodds_from_strength(p.strength)});
  }
  return out;
}

inline void check_shapes(const Costmap& costmap, const SegmentationMaskSet& masks, const LossConfig& cfg) {
  if (!same_shape(costmap, masks.labels())) fail(ErrorCode::DimensionMismatch, "costmap and masks differ in size");
  if (cfg.prior && !same_shape(*cfg.prior, costmap))
    fail(ErrorCode::DimensionMismatch, "prior and costmap differ in size");
}

inline double combine(const LossConfig& cfg, double l1, double l2) {
  switch (cfg.mode) {
    case LossMode::L1Only: return l1;
    case LossMode::L2Only: return l2;
    case LossMode::Combined: return l1 + cfg.lambda * l2;
  }
  return l1;
}

inline double l1_term(const std::vector<double>& means, const std::vector<ResolvedPreference>& prefs, double delta) {
  double l1 = 0.0;
  for (const auto& p : prefs) {
    const double gap = means[static_cast<std::size_t>(p.other_mask)] - means[static_cast<std::size_t>(p.preferred_mask)];
    l1 += huber(gap - p.target, delta);
  }
  return l1;
}

inline double l2_term(const Costmap& costmap, const Costmap& prior, double delta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < costmap.size(); ++i) sum += huber(costmap.storage()[i] - prior.storage()[i], delta);
  return sum / static_cast<double>(costmap.size());
}

}  // namespace detail

/// L = L1 + λ·L2, where L1 sums Huber residuals between the mask-mean cost
/// gaps and the target log-odds, and L2 is the mean per-cell Huber distance
/// to the prior. Both parts are always reported when computable.
inline LossValue loss(const Costmap& costmap, const SegmentationMaskSet& masks, const PreferenceContext& context,
                      const LossConfig& cfg) {
  cfg.validate();
  detail::check_shapes(costmap, masks, cfg);
  const auto prefs = detail::resolve(masks, context);
  LossValue v;
  v.l1 = detail::l1_term(mask_means(costmap, masks), prefs, cfg.huber_delta);
  if (cfg.prior) v.l2 = detail::l2_term(costmap, *cfg.prior, cfg.huber_delta);
  v.total = detail::combine(cfg, v.l1, v.l2);
  return v;
}

/// Analytic gradient of `loss(...).total` with respect to every cell.
inline Costmap loss_gradient(const Costmap& costmap, const SegmentationMaskSet& masks, const PreferenceContext& context,
                             const LossConfig& cfg) {
  cfg.validate();
  detail::check_shapes(costmap, masks, cfg);
  const auto prefs = detail::resolve(masks, context);
  Costmap grad(costmap.rows(), costmap.cols(), 0.0);

  if (cfg.mode != LossMode::L2Only) {
    // dμ_s/dC_cell = 1/|s| for cells in s, so L1 contributes a per-mask constant.
    const auto means = mask_means(costmap, masks);
    std::vector<double> per_mask(static_cast<std::size_t>(masks.count()), 0.0);
    for (const auto& p : prefs) {
      const double gap = means[static_cast<std::size_t>(p.other_mask)] - means[static_cast<std::size_t>(p.preferred_mask)];
      const double d = huber_derivative(gap - p.target, cfg.huber_delta);
      per_mask[static_cast<std::size_t>(p.other_mask)] += d / static_cast<double>(masks.area(p.other_mask));
      per_mask[static_cast<std::size_t>(p.preferred_mask)] -= d / static_cast<double>(masks.area(p.preferred_mask));
    }
    const auto& labels = masks.labels().storage();
    for (std::size_t i = 0; i < labels.size(); ++i) grad.storage()[i] = per_mask[static_cast<std::size_t>(labels[i])];
  }
  if (cfg.mode != LossMode::L1Only) {
    const double weight = (cfg.mode == LossMode::Combined ? cfg.lambda : 1.0) / static_cast<double>(costmap.size());
    for (std::size_t i = 0; i < costmap.size(); ++i)
      grad.storage()[i] += weight * huber_derivative(costmap.storage()[i] - cfg.prior->storage()[i], cfg.huber_delta);
  }
  return grad;
}

/// Exact inverse Bradley-Terry over the preference graph.
///
/// Solves c_other − c_preferred = Δ_i in least squares per connected
/// component, with the component's smallest class id pinned to 0. Classes
/// named by no preference get kUnreferencedClassCost.
inline SolveReport recover_class_costs(const SegmentationMaskSet& masks, const PreferenceContext& context) {
  if (context.empty()) fail(ErrorCode::EmptyContext, "no preferences to recover from");
  const auto prefs = detail::resolve(masks, context);
  const int k = masks.count();

  // Union-find over masks.
  std::vector<int> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  std::vector<bool> referenced(static_cast<std::size_t>(k), false);
  for (const auto& p : prefs) {
    referenced[static_cast<std::size_t>(p.preferred_mask)] = referenced[static_cast<std::size_t>(p.other_mask)] = true;
    parent[static_cast<std::size_t>(find(p.preferred_mask))] = find(p.other_mask);
  }

  std::vector<double> cost(static_cast<std::size_t>(k), kUnreferencedClassCost);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m)
    if (referenced[static_cast<std::size_t>(m)]) members[static_cast<std::size_t>(find(m))].push_back(m);

  for (auto& comp : members) {
    if (comp.empty()) continue;
    // Anchor: the member with the smallest class id.
    const int anchor = *std::min_element(comp.begin(), comp.end(), [&](int a, int b) {
      return masks.class_of_mask(a) < masks.class_of_mask(b);
    });
    std::vector<int> unknown_index(static_cast<std::size_t>(k), -1);
    int n = 0;
    for (int m : comp)
      if (m != anchor) unknown_index[static_cast<std::size_t>(m)] = n++;
    cost[static_cast<std::size_t>(anchor)] = 0.0;
    if (n == 0) continue;

    // Normal equations of the incidence system with the anchor column removed:
    // a weighted graph Laplacian, positive definite on a connected component.
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (const auto& p : prefs) {
      if (find(p.preferred_mask) != find(comp.front())) continue;
      const int o = unknown_index[static_cast<std::size_t>(p.other_mask)];
      const int q = unknown_index[static_cast<std::size_t>(p.preferred_mask)];
      if (o >= 0) { normal(o, o) += 1.0; rhs(o) += p.target; }
      if (q >= 0) { normal(q, q) += 1.0; rhs(q) -= p.target; }
      if (o >= 0 && q >= 0) { normal(o, q) -= 1.0; normal(q, o) -= 1.0; }
    }
    const Eigen::VectorXd x = normal.ldlt().solve(rhs);
    for (int m : comp)
      if (m != anchor) cost[static_cast<std::size_t>(m)] = x(unknown_index[static_cast<std::size_t>(m)]);
  }

  SolveReport report;
  double sq = 0.0;
  for (const auto& p : prefs) {
    const double r = cost[static_cast<std::size_t>(p.other_mask)] - cost[static_cast<std::size_t>(p.preferred_mask)] - p.target;
    sq += r * r;
  }
  report.residual_norm = std::sqrt(sq);
  for (int m = 0; m < k; ++m) report.class_costs[masks.class_of_mask(m)] = cost[static_cast<std::size_t>(m)];
  report.iterations = 1;
  report.converged = true;
  return report;
}

struct OptimizeOptions {
  int max_iters = 20000;
  double tol = 1e-10;  // on the max-norm of the per-cell gradient
};

struct OptimizeResult {
  Costmap costmap;
  SolveReport report;
  LossValue final_loss;
};

/// Gradient descent with Armijo backtracking on `loss`.
///
/// The trial step doubles after every accepted step and halves on rejection.
/// Stops when the gradient max-norm drops below `tol` or when no step yields
/// a representable decrease. On hitting `max_iters` the last iterate is
/// returned with converged=false.
inline OptimizeResult optimize_costmap(const SegmentationMaskSet& masks, const PreferenceContext& context,
                                       const LossConfig& cfg, const Costmap& init, OptimizeOptions opts = {}) {
  cfg.validate();
  detail::check_shapes(init, masks, cfg);
  require_finite(init, "initial costmap");

  Costmap x = init;
  LossValue fx = loss(x, masks, context, cfg);
  double step = 1.0;
  OptimizeResult result;
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iters; ++iter) {
    const Costmap g = loss_gradient(x, masks, context, cfg);
    double gmax = 0.0, gsq = 0.0;
    for (double v : g.values()) {
      gmax = std::max(gmax, std::abs(v));
      gsq += v * v;
    }
    if (gmax < opts.tol) {
      converged = true;
      break;
    }
    Costmap trial(x.rows(), x.cols());
    LossValue ft;
    bool accepted = false;
    for (int halvings = 0; halvings < 200; ++halvings) {
      for (std::size_t i = 0; i < x.size(); ++i) trial.storage()[i] = x.storage()[i] - step * g.storage()[i];
      ft = loss(trial, masks, context, cfg);
      if (ft.total < fx.total && ft.total <= fx.total - 0.5 * step * gsq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No step decreases the loss by more than its rounding: stationary to
      // working precision.
      converged = true;
      break;
    }
    x = std::move(trial);
    fx = ft;
    step *= 2.0;
  }

  result.costmap = std::move(x);
  result.final_loss = fx;
  result.report.iterations = iter;
  result.report.converged = converged;
  result.report.residual_norm = 0.0;
  const auto means = mask_means(result.costmap, masks);
  double sq = 0.0;
  for (const auto& p : detail::resolve(masks, context)) {
    const double r = means[static_cast<std::size_t>(p.other_mask)] - means[static_cast<std::size_t>(p.preferred_mask)] - p.target;
    sq += r * r;
  }
  result.report.residual_norm = std::sqrt(sq);
  for (int m = 0; m < masks.count(); ++m) result.report.class_costs[masks.class_of_mask(m)] = means[static_cast<std::size_t>(m)];
  return result;
}

/// Rescales λ so that l1 : λ·l2 = `ratio` : 1 at `at`. Keeps the configured λ
/// when either term vanishes there.
inline double calibrate_lambda(const Costmap& at, const SegmentationMaskSet& masks, const PreferenceContext& context,
                               const LossConfig& cfg, double ratio = 5.0) {
  if (!cfg.prior) fail(ErrorCode::MissingPrior, "calibration needs a prior");
  LossConfig probe = cfg;
  probe.mode = LossMode::Combined;
  const LossValue v = loss(at, masks, context, probe);
  if (v.l1 <= 0.0 || v.l2 <= 0.0) return cfg.lambda;
  return v.l1 / (ratio * v.l2);
}

/// Affine map sending [min C, max C] onto [lo, hi]. A constant map goes to lo.
inline Costmap normalize_to_range(const Costmap& costmap, double lo, double hi) {
  if (!(hi >= lo)) fail(ErrorCode::InvalidArgument, "normalization range must satisfy hi >= lo");
  Costmap out = costmap;
  if (costmap.empty()) return out;
  const double cmin = min_value(costmap);
  const double cmax = max_value(costmap);
  if (cmax == cmin) {
    std::fill(out.storage().begin(), out.storage().end(), lo);
    return out;
  }
  const double scale = (hi - lo) / (cmax - cmin);
  for (double& v : out.storage()) v = v == cmax ? hi : lo + (v - cmin) * scale;
  return out;
}

/// Divides by the maximum value; the "normalized" view of an unanchored map.
inline Costmap normalize_by_max(const Costmap& costmap) {
  Costmap out = costmap;
  if (costmap.empty()) return out;
  const double cmax = max_value(costmap);
  if (cmax == 0.0) return out;
  for (double& v : out.storage()) v /= cmax;
  return out;
}

}  // namespace prefcost
