#pragma once

#include <Eigen/Core>
#include <optional>

namespace freespace {

struct CameraIntrinsics {
  double focal_px = 0.0;     // focal length in pixels (rectified)
  double cu = 0.0, cv = 0.0; // principal point, pixels
  double baseline_m = 0.0;   // stereo baseline, meters

  CameraIntrinsics() = default;
  CameraIntrinsics(double focal, double cu_, double cv_, double baseline);
};

// One stereo observation (u, v, d) with its 3x3 error covariance.
struct Measurement {
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();

  Measurement() = default;
  // Validates d > 0 and covariance symmetric positive-definite.
  Measurement(double u_, double v_, double d_, const Eigen::Matrix3d& cov);
};

struct Point3 {
  double x, y, z;
};

// Z = f*b/d, X = (u-cu)*Z/f, Y = (v-cv)*Z/f. Throws on d <= 0.
Point3 triangulate(const Measurement& m, const CameraIntrinsics& cam);

enum class AxisMode { kUDisparity, kMetricGround };

struct CellIndex {
  int i;  // column, lateral axis
  int j;  // row, depth axis (0 = nearest to the ego vehicle)
  bool operator==(const CellIndex&) const = default;
};

// Regular 2D tessellation. Axis 0 is lateral (u or x, indexed by i), axis 1
// is depth-like (d or z, indexed by j). Cell centers follow
// origin + index * step; steps are signed so that row index always grows
// with distance from the ego vehicle (the disparity axis runs downward).
// Each cell owns the half-open coordinate interval around its center that
// is closed on the boundary it shares with the next-higher index, i.e. a
// point on a shared boundary belongs to the lower-index cell.
class GridGeometry {
 public:
  GridGeometry() = default;
  GridGeometry(AxisMode mode, int n_cols, int n_rows, double origin0,
               double origin1, double step0, double step1);

  // Column/disparity grid covering u in [0,width) at 1px cells and
  // d in (0, max_disparity]; row 0 holds the highest disparity (nearest).
  static GridGeometry u_disparity(int image_width, int max_disparity);
  // Ground-plane grid: x in [-lateral, lateral], z in [0, depth],
  // square cells of `cell_m` meters; row 0 nearest.
  static GridGeometry metric(double cell_m = 0.2, double depth_m = 40.0,
                             double lateral_m = 20.0);

  AxisMode mode() const { return mode_; }
  int n_cols() const { return n_cols_; }
  int n_rows() const { return n_rows_; }
  double step0() const { return step0_; }
  double step1() const { return step1_; }
  double origin0() const { return origin0_; }
  double origin1() const { return origin1_; }

  // Center coordinates of cell (i, j): (u, d) or (x, z) by mode.
  double center0(int i) const { return origin0_ + i * step0_; }
  double center1(int j) const { return origin1_ + j * step1_; }

  bool contains(CellIndex c) const {
    return c.i >= 0 && c.i < n_cols_ && c.j >= 0 && c.j < n_rows_;
  }

  // Cell containing the coordinate pair, or nullopt when outside the grid.
  std::optional<CellIndex> cell_at(double a0, double a1) const;

  bool operator==(const GridGeometry&) const = default;

 private:
  AxisMode mode_ = AxisMode::kUDisparity;
  int n_cols_ = 0;
  int n_rows_ = 0;
  double origin0_ = 0.0;
  double origin1_ = 0.0;
  double step0_ = 1.0;
  double step1_ = 1.0;
};

// Grid cell of a measurement. The u-disparity overload uses (u, d) directly;
// metric grids need the camera to project to the ground plane.
std::optional<CellIndex> cell_of(const Measurement& m, const GridGeometry& g);
std::optional<CellIndex> cell_of(const Measurement& m, const GridGeometry& g,
                                 const CameraIntrinsics& cam);

// Ground-plane projection (x, z) = (X, Z) of a measurement.
Eigen::Vector2d ground_point(const Measurement& m,
                             const CameraIntrinsics& cam);

// First-order propagation of the measurement covariance to the ground
// plane: J * cov * J^T with J = d(x,z)/d(u,v,d).
Eigen::Matrix2d ground_covariance(const Measurement& m,
                                  const CameraIntrinsics& cam);

bool is_symmetric_positive_definite(const Eigen::Matrix3d& m);

}  // namespace freespace
