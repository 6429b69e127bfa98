#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prefcost/error.hpp"

namespace prefcost {

using ClassId = std::int64_t;

/// Largest strength fed to the logit; keeps the target log-odds finite for α = 1.
inline constexpr double kMaxStrength = 1.0 - 1e-6;

/// "preferred_class is cheaper than other_class, with strength α ∈ [0, 1]".
struct ScaledPreference {
  ClassId preferred = 0;
  ClassId other = 0;
  double strength = 0.0;

  friend bool operator==(const ScaledPreference&, const ScaledPreference&) = default;
};

/// Ordered list of scaled preferences. Repeated class pairs are kept and each
/// occurrence contributes its own residual downstream.
using PreferenceContext = std::vector<ScaledPreference>;

/// Per-class scalar cost, keyed by class id.
using ClassCosts = std::map<ClassId, double>;

struct ClassPair {
  ClassId a = 0;
  ClassId b = 0;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline void validate(const ScaledPreference& p) {
  if (p.preferred == p.other) fail(ErrorCode::InvalidArgument, "preference compares a class with itself");
  if (!std::isfinite(p.strength) || p.strength < 0.0 || p.strength > 1.0)
    fail(ErrorCode::DomainError, "strength outside [0, 1]");
}

inline void validate(const ClassCosts& costs) {
  for (const auto& [id, cost] : costs)
    if (!std::isfinite(cost) || cost < 0.0)
      fail(ErrorCode::NonFinite, "class " + std::to_string(id) + " has an invalid cost");
}

/// Forward Bradley-Terry: α = 2σ(γ_other − γ_preferred) − 1.
inline double strength_from_costs(double cost_preferred, double cost_other) {
  if (!std::isfinite(cost_preferred) || !std::isfinite(cost_other))
    fail(ErrorCode::NonFinite, "costs must be finite");
  if (cost_other < cost_preferred) fail(ErrorCode::OrderViolation, "preferred class is costlier than the other class");
  // 2σ(d) − 1 = tanh(d/2); tanh avoids the cancellation near d = 0.
  return std::tanh(0.5 * (cost_other - cost_preferred));
}

/// Inverse Bradley-Terry: the cost gap Δ = σ⁻¹((α + 1)/2), α clamped at kMaxStrength.
inline double logodds_from_strength(double strength) {
  if (!std::isfinite(strength) || strength < 0.0 || strength > 1.0)
    fail(ErrorCode::DomainError, "strength outside [0, 1]");
  // logit((α+1)/2) = 2 atanh(α), the exact inverse of tanh(Δ/2).
  return 2.0 * std::atanh(std::min(strength, kMaxStrength));
}

/// Builds one preference per requested pair, cheaper class first. Ties go to
/// the smaller class id with strength 0.
inline PreferenceContext context_from_class_costs(const ClassCosts& costs, const std::vector<ClassPair>& pairs) {
  PreferenceContext context;
  context.reserve(pairs.size());
  for (const ClassPair& pair : pairs) {
    const auto ia = costs.find(pair.a);
    const auto ib = costs.find(pair.b);
    if (ia == costs.end()) fail(ErrorCode::UnknownClass, "class " + std::to_string(pair.a) + " has no cost");
    if (ib == costs.end()) fail(ErrorCode::UnknownClass, "class " + std::to_string(pair.b) + " has no cost");
    if (pair.a == pair.b) fail(ErrorCode::InvalidArgument, "pair compares a class with itself");
    std::pair<ClassId, double> lo = *ia;
    std::pair<ClassId, double> hi = *ib;
    if (hi.second < lo.second || (hi.second == lo.second && hi.first < lo.first)) std::swap(lo, hi);
    context.push_back({lo.first, hi.first, strength_from_costs(lo.second, hi.second)});
  }
  return context;
}

}  // namespace prefcost
