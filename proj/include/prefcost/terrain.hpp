#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"
#include "prefcost/masks.hpp"
#include "prefcost/preference.hpp"
#include "prefcost/rng.hpp"

namespace prefcost {

/// Square texture tiles, one per terrain class.
struct TerrainBank {
  std::map<ClassId, RgbImage> textures;
  std::map<ClassId, std::string> names;

  std::size_t size() const noexcept { return textures.size(); }

  int tile_side() const {
    if (textures.empty()) fail(ErrorCode::InvalidArgument, "empty terrain bank");
    return textures.begin()->second.rows();
  }

  void validate() const {
    if (textures.size() < 2) fail(ErrorCode::InvalidArgument, "terrain bank needs at least 2 entries");
    const int side = tile_side();
    for (const auto& [id, tile] : textures) {
      if (id < 0) fail(ErrorCode::InvalidArgument, "terrain ids must be non-negative");
      if (tile.rows() != side || tile.cols() != side || side <= 0)
        fail(ErrorCode::InvalidArgument, "terrain tiles must be square and equally sized");
    }
  }
};

using Heightfield = Grid<double>;

/// Corner order: top-left, top-right, bottom-left, bottom-right.
using Corners = std::array<double, 4>;

inline constexpr int kMaxDiamondSquareLevel = 12;

/// Diamond-square midpoint displacement on a (2^n + 1)² grid.
///
/// Corners are drawn from [0, 1) unless `corners` overrides them. At each
/// subdivision level the noise is uniform in [-amp, amp], starting at
/// `roughness` and halving per level. Border midpoints in the square step
/// average their three in-grid neighbours (no wrap-around).
inline Heightfield diamond_square(int n, double roughness, std::uint64_t seed,
                                  std::optional<Corners> corners = std::nullopt) {
  if (n < 1 || n > kMaxDiamondSquareLevel) fail(ErrorCode::SizeLimit, "diamond-square level must be in [1, 12]");
  if (!std::isfinite(roughness) || roughness < 0.0) fail(ErrorCode::InvalidArgument, "roughness must be >= 0");

  const int side = (1 << n) + 1;
  const int last = side - 1;
  Heightfield h(side, side, 0.0);
  Rng rng(seed);

  Corners c{};
  for (double& v : c) v = rng.uniform();
  if (corners) c = *corners;
  h(0, 0) = c[0];
  h(0, last) = c[1];
  h(last, 0) = c[2];
  h(last, last) = c[3];

  double amp = roughness;
  for (int step = last; step > 1; step /= 2, amp *= 0.5) {
    const int half = step / 2;
    auto noise = [&] { return amp > 0.0 ? rng.uniform(-amp, amp) : 0.0; };

    // Diamond step: centre of every square.
    for (int r = half; r < side; r += step)
      for (int col = half; col < side; col += step) {
        const double mean =
            (h(r - half, col - half) + h(r - half, col + half) + h(r + half, col - half) + h(r + half, col + half)) / 4.0;
        h(r, col) = mean + noise();
      }

    // Square step: edge midpoints, offset rows alternate.
    for (int r = 0; r < side; r += half) {
      const int start = (r / half) % 2 == 0 ? half : 0;
      for (int col = start; col < side; col += step) {
        double sum = 0.0;
        int count = 0;
        if (r - half >= 0) { sum += h(r - half, col); ++count; }
        if (r + half < side) { sum += h(r + half, col); ++count; }
        if (col - half >= 0) { sum += h(r, col - half); ++count; }
        if (col + half < side) { sum += h(r, col + half); ++count; }
        h(r, col) = sum / count + noise();
      }
    }
  }
  return h;
}

/// Splits a heightfield into k bins at its empirical j/k quantiles.
///
/// A cell equal to a threshold goes to the lower bin. Thresholds are nudged
/// along the distinct values so that no bin is ever empty.
inline SegmentationMaskSet masks_from_heightfield(const Heightfield& h, int k) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "need at least 2 masks");
  require_finite(h, "heightfield");
  std::vector<double> sorted(h.values().begin(), h.values().end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const int d = static_cast<int>(distinct.size());
  if (d < k) fail(ErrorCode::DegenerateField, "fewer distinct heights than requested masks");

  const std::size_t count = sorted.size();
  std::vector<int> idx(static_cast<std::size_t>(k - 1));
  int prev = -1;
  for (int j = 1; j < k; ++j) {
    // Lower empirical quantile: smallest value with at least j/k of the mass at or below it.
    const std::size_t pos = (static_cast<std::size_t>(j) * count + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k) - 1;
    int q = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), sorted[pos]) - distinct.begin());
    q = std::max(q, prev + 1);
    q = std::min(q, d - k + j - 1);
    idx[static_cast<std::size_t>(j - 1)] = q;
    prev = q;
  }
  std::vector<double> thresholds;
  for (int i : idx) thresholds.push_back(distinct[static_cast<std::size_t>(i)]);

  Grid<int> labels(h.rows(), h.cols(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = h.storage()[i];
    labels.storage()[i] = static_cast<int>(std::lower_bound(thresholds.begin(), thresholds.end(), v) - thresholds.begin());
  }
  return SegmentationMaskSet::from_labels(std::move(labels), k);
}

/// Default global cost pool {0.0, 0.1, ..., 1.0}.
inline std::vector<double> default_cost_pool() {
  std::vector<double> pool;
  for (int i = 0; i <= 10; ++i) pool.push_back(i / 10.0);
  return pool;
}

struct SynthParams {
  int classes = 4;        // k
  int pairs = 3;          // K
  int grid_n = 6;         // side 2^n + 1
  std::vector<double> cost_pool = default_cost_pool();
  std::uint64_t seed = 0;
  double roughness = 0.6;
};

/// One synthetic example: image, masks, per-class costs, target costmap and
/// a context consistent with the costs under Bradley-Terry.
struct Scenario {
  RgbImage image;
  SegmentationMaskSet masks;
  ClassCosts class_costs;
  Costmap target_costmap;
  PreferenceContext context;
  std::uint64_t seed = 0;
  std::map<ClassId, std::string> labels;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Repeats the class tile under its mask, anchored at the image's top-left.
inline RgbImage composite_image(const TerrainBank& bank, const SegmentationMaskSet& masks) {
  const int t = bank.tile_side();
  RgbImage image(masks.rows(), masks.cols());
  for (int r = 0; r < masks.rows(); ++r)
    for (int c = 0; c < masks.cols(); ++c) {
      const ClassId id = masks.class_at(r, c);
      auto it = bank.textures.find(id);
      if (it == bank.textures.end()) fail(ErrorCode::UnknownClass, "no texture for class " + std::to_string(id));
      image(r, c) = it->second(r % t, c % t);
    }
  return image;
}

inline Scenario synthesize_scenario(const TerrainBank& bank, const SynthParams& p) {
  bank.validate();
  const int k = p.classes;
  if (k < 2) fail(ErrorCode::InvalidArgument, "need at least 2 classes");
  if (static_cast<std::size_t>(k) > bank.size()) fail(ErrorCode::PoolTooSmall, "more classes than terrains in the bank");
  if (static_cast<std::size_t>(k) > p.cost_pool.size()) fail(ErrorCode::PoolTooSmall, "more classes than pooled costs");
  if (p.pairs < 0 || p.pairs > k * (k - 1) / 2) fail(ErrorCode::PoolTooSmall, "more pairs than distinct class pairs");
  for (double g : p.cost_pool)
    if (!std::isfinite(g) || g < 0.0 || g > 1.0) fail(ErrorCode::InvalidArgument, "pooled costs must lie in [0, 1]");

  const Heightfield h = diamond_square(p.grid_n, p.roughness, mix_seed(p.seed, 0));
  const SegmentationMaskSet bins = masks_from_heightfield(h, k);

  Rng rng(mix_seed(p.seed, 1));
  std::vector<ClassId> bank_ids;
  for (const auto& entry : bank.textures) bank_ids.push_back(entry.first);
  const auto terrain_pick = rng.sample_indices(bank_ids.size(), static_cast<std::size_t>(k));
  const auto cost_pick = rng.sample_indices(p.cost_pool.size(), static_cast<std::size_t>(k));

  Scenario s;
  s.seed = p.seed;
  std::vector<ClassId> mask_classes;
  for (int m = 0; m < k; ++m) {
    const ClassId id = bank_ids[terrain_pick[static_cast<std::size_t>(m)]];
    mask_classes.push_back(id);
    s.class_costs[id] = p.cost_pool[cost_pick[static_cast<std::size_t>(m)]];
    auto name = bank.names.find(id);
    s.labels[id] = name == bank.names.end() ? std::to_string(id) : name->second;
  }
  s.masks = SegmentationMaskSet(bins.labels(), mask_classes);
  s.image = composite_image(bank, s.masks);
  s.target_costmap = paint_costmap(s.masks, s.class_costs);

  std::vector<ClassPair> all_pairs;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) all_pairs.push_back({mask_classes[static_cast<std::size_t>(i)], mask_classes[static_cast<std::size_t>(j)]});
  std::vector<ClassPair> chosen;
  for (std::size_t i : rng.sample_indices(all_pairs.size(), static_cast<std::size_t>(p.pairs))) chosen.push_back(all_pairs[i]);
  s.context = context_from_class_costs(s.class_costs, chosen);
  return s;
}

/// Procedurally coloured tiles, used when no photographic bank is available.
inline TerrainBank make_placeholder_bank(int count = 12, int tile_side = 16, std::uint64_t seed = 2024) {
  static const char* kNames[] = {"sand", "mud",   "forest_floor", "pebbles", "grass",   "snow",
                                 "concrete", "gravel", "moss",    "clay",    "asphalt", "leaves"};
  if (count < 2 || tile_side < 1) fail(ErrorCode::InvalidArgument, "placeholder bank needs >= 2 tiles of side >= 1");
  TerrainBank bank;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    // Hues spread around the colour wheel; each pixel gets a little grain.
    const double hue = 6.0 * i / count;
    const int sector = static_cast<int>(hue);
    const double f = hue - sector;
    std::array<double, 3> base{};
    switch (sector % 6) {
      case 0: base = {1, f, 0}; break;
      case 1: base = {1 - f, 1, 0}; break;
      case 2: base = {0, 1, f}; break;
      case 3: base = {0, 1 - f, 1}; break;
      case 4: base = {f, 0, 1}; break;
      default: base = {1, 0, 1 - f}; break;
    }
    RgbImage tile(tile_side, tile_side);
    for (int r = 0; r < tile_side; ++r)
      for (int c = 0; c < tile_side; ++c) {
        const double grain = 0.75 + 0.25 * rng.uniform();
        Rgb px{};
        for (int ch = 0; ch < 3; ++ch) px[static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(std::lround(40 + 200 * base[static_cast<std::size_t>(ch)] * grain));
        tile(r, c) = px;
      }
    bank.textures[i] = std::move(tile);
    bank.names[i] = i < 12 ? kNames[i] : "terrain_" + std::to_string(i);
  }
  return bank;
}

}  // namespace prefcost
