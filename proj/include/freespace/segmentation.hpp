#pragma once

#include <optional>
#include <string>
#include <vector>

#include "freespace/occupancy_grid.hpp"

namespace freespace {

enum class CellLabel { kFree, kOccupied };

// Per-column boundary between free space and the first obstacle. Columns
// without a boundary are free across their whole depth range.
class FreeSpaceProfile {
 public:
  FreeSpaceProfile() = default;
  FreeSpaceProfile(std::vector<std::optional<int>> boundary, int n_rows)
      : boundary_(std::move(boundary)), n_rows_(n_rows) {}

  int n_cols() const { return static_cast<int>(boundary_.size()); }
  int n_rows() const { return n_rows_; }
  const std::optional<int>& boundary(int i) const { return boundary_[i]; }
  std::vector<std::optional<int>>& boundaries() { return boundary_; }
  const std::vector<std::optional<int>>& boundaries() const {
    return boundary_;
  }

  // Free strictly below the boundary row, occupied at and beyond it.
  CellLabel label(int i, int j) const {
    const auto& b = boundary_[i];
    return (b && j >= *b) ? CellLabel::kOccupied : CellLabel::kFree;
  }

  bool operator==(const FreeSpaceProfile&) const = default;

 private:
  std::vector<std::optional<int>> boundary_;
  int n_rows_ = 0;
};

// Scan each column from the near row outward; the first cell with
// D(i,j) >= T is the boundary and everything behind it is occupied.
FreeSpaceProfile threshold_segment(const OccupancyGrid& grid, double T);

// Binarize at T (white = D >= T), scan near to far counting black->white
// transitions; the boundary is the first white cell of the n-th transition.
// A transition needs a preceding black cell, so a column that starts white
// does not count its leading run. Columns with fewer than n transitions
// have no boundary.
FreeSpaceProfile transition_segment(const OccupancyGrid& grid, double T,
                                    int n = 2);

// Optional median smoothing of the boundary indices (window 2r+1, columns
// without a boundary pass through unchanged and are ignored as neighbors).
FreeSpaceProfile median_filter_profile(const FreeSpaceProfile& profile,
                                       int radius);

// JSON array of per-column boundary rows (-1 for no boundary) plus an
// 8-bit PGM overlay, free = white, occupied = grey, near row at the bottom.
void export_profile(const std::string& json_path,
                    const FreeSpaceProfile& profile);
void export_profile_overlay(const std::string& pgm_path,
                            const FreeSpaceProfile& profile);

}  // namespace freespace
