#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "prefcost/error.hpp"

namespace prefcost {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) fail(ErrorCode::InvalidArgument, "negative grid dimensions");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }
  Grid(int rows, int cols, std::vector<T> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
      fail(ErrorCode::DimensionMismatch, "grid data does not match dimensions");
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }
  bool contains(Cell cell) const noexcept { return contains(cell.row, cell.col); }
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }
  T& operator[](Cell cell) noexcept { return data_[index(cell.row, cell.col)]; }
  const T& operator[](Cell cell) const noexcept { return data_[index(cell.row, cell.col)]; }

  T& at(int r, int c) {
    if (!contains(r, c)) fail(ErrorCode::OutOfBounds, "cell outside grid");
    return data_[index(r, c)];
  }
  const T& at(int r, int c) const {
    if (!contains(r, c)) fail(ErrorCode::OutOfBounds, "cell outside grid");
    return data_[index(r, c)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
bool same_shape(const Grid<A>& a, const Grid<B>& b) noexcept {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

/// Per-cell traversal cost. Values are unitless and finite.
using Costmap = Grid<double>;

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Grid<Rgb>;

inline double min_value(const Costmap& c) {
  if (c.empty()) fail(ErrorCode::InvalidArgument, "empty costmap");
  return *std::min_element(c.values().begin(), c.values().end());
}

inline double max_value(const Costmap& c) {
  if (c.empty()) fail(ErrorCode::InvalidArgument, "empty costmap");
  return *std::max_element(c.values().begin(), c.values().end());
}

inline void require_finite(const Costmap& c, const char* what) {
  for (double v : c.values())
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, std::string(what) + " contains a non-finite value");
}

}  // namespace prefcost
