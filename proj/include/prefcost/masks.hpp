#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"
#include "prefcost/preference.hpp"

namespace prefcost {

/// k disjoint masks covering an H×W grid, stored as a label image.
///
/// Mask i belongs to terrain class `class_ids()[i]`. Storing labels rather
/// than k boolean planes makes the exact-partition invariant structural.
class SegmentationMaskSet {
 public:
  SegmentationMaskSet() = default;

  SegmentationMaskSet(Grid<int> labels, std::vector<ClassId> class_ids)
      : labels_(std::move(labels)), class_ids_(std::move(class_ids)) {
    const int k = static_cast<int>(class_ids_.size());
    for (int v : labels_.values())
      if (v < 0 || v >= k) fail(ErrorCode::InvalidArgument, "mask label out of range");
    std::vector<ClassId> sorted = class_ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorCode::InvalidArgument, "duplicate class id in mask set");
    areas_.assign(class_ids_.size(), 0);
    for (int v : labels_.values()) ++areas_[static_cast<std::size_t>(v)];
  }

  /// Labels with class id equal to mask index.
  static SegmentationMaskSet from_labels(Grid<int> labels, int k) {
    std::vector<ClassId> ids(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) ids[static_cast<std::size_t>(i)] = i;
    return SegmentationMaskSet(std::move(labels), std::move(ids));
  }

  int rows() const noexcept { return labels_.rows(); }
  int cols() const noexcept { return labels_.cols(); }
  int count() const noexcept { return static_cast<int>(class_ids_.size()); }

  const Grid<int>& labels() const noexcept { return labels_; }
  const std::vector<ClassId>& class_ids() const noexcept { return class_ids_; }
  ClassId class_of_mask(int mask) const { return class_ids_.at(static_cast<std::size_t>(mask)); }
  ClassId class_at(int row, int col) const { return class_of_mask(labels_.at(row, col)); }

  std::size_t area(int mask) const { return areas_.at(static_cast<std::size_t>(mask)); }

  /// Mask index owning `id`, or -1.
  int find_mask(ClassId id) const noexcept {
    auto it = std::find(class_ids_.begin(), class_ids_.end(), id);
    return it == class_ids_.end() ? -1 : static_cast<int>(it - class_ids_.begin());
  }

  int mask_of(ClassId id) const {
    const int m = find_mask(id);
    if (m < 0) fail(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no mask");
    return m;
  }

  Grid<bool> mask(int index) const {
    Grid<bool> out(rows(), cols(), false);
    for (std::size_t i = 0; i < labels_.size(); ++i) out.storage()[i] = labels_.storage()[i] == index;
    return out;
  }

  friend bool operator==(const SegmentationMaskSet& a, const SegmentationMaskSet& b) {
    return a.labels_ == b.labels_ && a.class_ids_ == b.class_ids_;
  }

 private:
  Grid<int> labels_;
  std::vector<ClassId> class_ids_;
  std::vector<std::size_t> areas_;
};

/// Mean of `costmap` over every mask, indexed by mask.
inline std::vector<double> mask_means(const Costmap& costmap, const SegmentationMaskSet& masks) {
  if (!same_shape(costmap, masks.labels())) fail(ErrorCode::DimensionMismatch, "costmap and masks differ in size");
  std::vector<double> sums(static_cast<std::size_t>(masks.count()), 0.0);
  const auto& labels = masks.labels().storage();
  const auto& values = costmap.storage();
  for (std::size_t i = 0; i < values.size(); ++i) sums[static_cast<std::size_t>(labels[i])] += values[i];
  for (int m = 0; m < masks.count(); ++m) {
    const std::size_t a = masks.area(m);
    sums[static_cast<std::size_t>(m)] = a == 0 ? 0.0 : sums[static_cast<std::size_t>(m)] / static_cast<double>(a);
  }
  return sums;
}

/// Paints every mask with its class cost. Classes missing from `costs` are an error.
inline Costmap paint_costmap(const SegmentationMaskSet& masks, const ClassCosts& costs) {
  std::vector<double> per_mask(static_cast<std::size_t>(masks.count()));
  for (int m = 0; m < masks.count(); ++m) {
    auto it = costs.find(masks.class_of_mask(m));
    if (it == costs.end())
      fail(ErrorCode::UnknownClass, "no cost for class " + std::to_string(masks.class_of_mask(m)));
    per_mask[static_cast<std::size_t>(m)] = it->second;
  }
  Costmap out(masks.rows(), masks.cols());
  const auto& labels = masks.labels().storage();
  for (std::size_t i = 0; i < labels.size(); ++i) out.storage()[i] = per_mask[static_cast<std::size_t>(labels[i])];
  return out;
}

}  // namespace prefcost
