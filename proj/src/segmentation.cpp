#include "freespace/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "freespace/error.hpp"
#include "freespace/image_io.hpp"

namespace freespace {

FreeSpaceProfile threshold_segment(const OccupancyGrid& grid, double T) {
  if (T < 0.0) throw Error("threshold_segment: threshold must be >= 0");
  const GridGeometry& g = grid.geometry();
  std::vector<std::optional<int>> boundary(g.n_cols());
  for (int i = 0; i < g.n_cols(); ++i) {
    for (int j = 0; j < g.n_rows(); ++j) {
      if (grid.at(i, j) >= T) {
        boundary[i] = j;
        break;
      }
    }
  }
  return FreeSpaceProfile(std::move(boundary), g.n_rows());
}

FreeSpaceProfile transition_segment(const OccupancyGrid& grid, double T,
                                    int n) {
  if (T < 0.0) throw Error("transition_segment: threshold must be >= 0");
  if (n < 1) throw Error("transition_segment: ordinal must be >= 1");
  const GridGeometry& g = grid.geometry();
  std::vector<std::optional<int>> boundary(g.n_cols());
  for (int i = 0; i < g.n_cols(); ++i) {
    bool prev_white = true;  // leading white run is not a transition
    int transitions = 0;
    for (int j = 0; j < g.n_rows(); ++j) {
      const bool white = grid.at(i, j) >= T;
      if (white && !prev_white) {
        if (++transitions == n) {
          boundary[i] = j;
          break;
        }
      }
      prev_white = white;
    }
  }
  return FreeSpaceProfile(std::move(boundary), g.n_rows());
}

FreeSpaceProfile median_filter_profile(const FreeSpaceProfile& profile,
                                       int radius) {
  if (radius < 1) return profile;
  const int n = profile.n_cols();
  std::vector<std::optional<int>> out(n);
  std::vector<int> window;
  for (int i = 0; i < n; ++i) {
    if (!profile.boundary(i)) continue;
    window.clear();
    for (int k = std::max(0, i - radius); k <= std::min(n - 1, i + radius);
         ++k) {
      if (profile.boundary(k)) window.push_back(*profile.boundary(k));
    }
    std::nth_element(window.begin(), window.begin() + window.size() / 2,
                     window.end());
    out[i] = window[window.size() / 2];
  }
  return FreeSpaceProfile(std::move(out), profile.n_rows());
}

void export_profile(const std::string& json_path,
                    const FreeSpaceProfile& profile) {
  nlohmann::json doc;
  doc["n_rows"] = profile.n_rows();
  auto& arr = doc["boundaries"] = nlohmann::json::array();
  for (int i = 0; i < profile.n_cols(); ++i)
    arr.push_back(profile.boundary(i) ? *profile.boundary(i) : -1);
  std::ofstream out(json_path);
  if (!out) throw FormatError(json_path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
}

void export_profile_overlay(const std::string& pgm_path,
                            const FreeSpaceProfile& profile) {
  const int rows = profile.n_rows();
  ImageU8 img(profile.n_cols(), rows, 255);
  for (int i = 0; i < profile.n_cols(); ++i) {
    for (int j = 0; j < rows; ++j) {
      const int y = rows - 1 - j;  // near row rendered at the bottom
      img(i, y) = profile.label(i, j) == CellLabel::kFree ? 255 : 128;
    }
  }
  write_gray8(pgm_path, img);
}

}  // namespace freespace
