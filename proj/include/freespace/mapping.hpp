#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "freespace/disparity.hpp"
#include "freespace/flow_model.hpp"
#include "freespace/occupancy_grid.hpp"

namespace freespace {

// Ground-plane transform p' = L p + t. Composition applies the right-hand
// side first: (a * b)(p) = a(b(p)).
class AffineTransform2D {
 public:
  AffineTransform2D()
      : linear_(Eigen::Matrix2d::Identity()),
        translation_(Eigen::Vector2d::Zero()) {}
  AffineTransform2D(const Eigen::Matrix2d& linear,
                    const Eigen::Vector2d& translation)
      : linear_(linear), translation_(translation) {}

  static AffineTransform2D identity() { return {}; }
  static AffineTransform2D rigid(double angle_rad,
                                 const Eigen::Vector2d& translation);

  const Eigen::Matrix2d& linear() const { return linear_; }
  const Eigen::Vector2d& translation() const { return translation_; }

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    return linear_ * p + translation_;
  }
  AffineTransform2D inverse() const;

  // Rotation angle of the linear block (exact for rigid transforms).
  double rotation_angle() const {
    return std::atan2(linear_(1, 0), linear_(0, 0));
  }

  Eigen::Matrix<double, 2, 3> matrix() const;
  static AffineTransform2D from_matrix(const Eigen::Matrix<double, 2, 3>& m);

  int source_frame = -1;
  int target_frame = -1;

 private:
  Eigen::Matrix2d linear_;
  Eigen::Vector2d translation_;
};

inline AffineTransform2D operator*(const AffineTransform2D& a,
                                   const AffineTransform2D& b) {
  return AffineTransform2D(a.linear() * b.linear(),
                           a.linear() * b.translation() + a.translation());
}

struct PointPair {
  Eigen::Vector2d from;  // ground point in frame i
  Eigen::Vector2d to;    // same point in frame i+1
};

enum class TransformModel { kRigid, kAffine };

// Least-squares transform mapping `from` points onto `to` points. Rigid
// fits rotation + translation in closed form; affine solves the full 2x3
// system. Throws EstimationError for < 3 pairs or collinear geometry.
AffineTransform2D estimate_transform(const std::vector<PointPair>& pairs,
                                     TransformModel model =
                                         TransformModel::kRigid);

// Ground-plane correspondences for the background-labeled samples, using
// the disparity at each endpoint. Samples whose disparity is missing in
// either frame are dropped and tallied.
struct GroundPairs {
  std::vector<PointPair> pairs;
  int skipped_invalid_disparity = 0;
};
GroundPairs ground_pairs_from_samples(const std::vector<FlowSample>& samples,
                                      const std::vector<MotionLabel>& labels,
                                      const DisparityImage& disp_i,
                                      const DisparityImage& disp_i1,
                                      const CameraIntrinsics& cam);

// Per-cell count of measurements landing in each cell of the grid; feeds
// the re-observation rule for dynamic cells.
Image<std::uint32_t> count_measurement_hits(const MeasurementSet& ms,
                                            const GridGeometry& g,
                                            const CameraIntrinsics& cam);

// Measurements at least `min_height_m` above the ground plane (camera at
// `camera_height_m` above it, y axis pointing down). Road-surface points
// dominate near metric cells by sheer pixel density, so only above-ground
// points feed the bird's-eye obstacle evidence; the full set still drives
// hit counting.
MeasurementSet filter_above_ground(const MeasurementSet& ms,
                                   const CameraIntrinsics& cam,
                                   double camera_height_m,
                                   double min_height_m);

enum class CellState : std::uint8_t { kUnknown, kFree, kOccupied };

struct MapCell {
  double accum = 0.0;       // fused occupancy likelihood
  std::uint32_t count = 0;  // fuse splats received (observations)
  std::uint32_t hits = 0;   // measurements that fell in this cell
  bool force_unknown = false;
};

struct DynamicMarkStats {
  int marked_cells = 0;
  int skipped_invalid_disparity = 0;
};

// Bird's-eye occupancy map over an unbounded ground plane, grown lazily in
// fixed-size tiles. A cell is occupied when its accumulated likelihood
// reaches threshold * observation count, free when observed below it, and
// unknown when never observed or force-marked by a dynamic object.
class GlobalMap {
 public:
  static constexpr int kTileSize = 64;

  explicit GlobalMap(double cell_m = 0.2, double occupancy_threshold = 40.0);

  double cell_size() const { return cell_m_; }
  double occupancy_threshold() const { return threshold_; }

  // Adds the local grid (metric mode) through `pose` (local -> global).
  // Local likelihoods splat onto the global cell containing each local
  // cell center; every splat counts as one observation. Cells receiving a
  // measurement hit lose any pending force-unknown mark (re-observation).
  // The pose is appended to the trajectory. Throws on u-disparity grids.
  void fuse(const OccupancyGrid& local, const Image<std::uint32_t>& hits,
            const AffineTransform2D& pose);

  // Drops the accumulated occupancy evidence of each dynamic point's cell
  // and force-marks it unknown; the moving object may have been occluding
  // something, so the cell's state must be re-earned from later
  // observations. Points carry pixel coordinates; those with no valid
  // disparity are skipped and tallied.
  DynamicMarkStats mark_dynamic_cells(
      const std::vector<Eigen::Vector2d>& dynamic_px,
      const DisparityImage& disp, const CameraIntrinsics& cam,
      const AffineTransform2D& pose);

  CellState state(int gi, int gj) const;
  const MapCell* cell(int gi, int gj) const;

  // Global cell containing a ground point.
  Eigen::Vector2i cell_index(const Eigen::Vector2d& p) const;

  struct Bounds {
    int gi0 = 0, gj0 = 0, gi1 = -1, gj1 = -1;  // inclusive; empty if gi1<gi0
    bool empty() const { return gi1 < gi0 || gj1 < gj0; }
  };
  Bounds bounds() const;

  const std::vector<AffineTransform2D>& trajectory() const {
    return trajectory_;
  }

 private:
  struct Tile {
    std::vector<MapCell> cells;
    Tile() : cells(kTileSize * kTileSize) {}
  };

  MapCell& cell_mut(int gi, int gj);

  double cell_m_;
  double threshold_;
  std::map<std::pair<int, int>, Tile> tiles_;
  std::vector<AffineTransform2D> trajectory_;
};

// Tri-level render: free = 255, unknown = 128, occupied = 0; depth grows
// upward in the image.
void export_map(const std::string& pgm_path, const GlobalMap& map);

// Per-frame 2x3 global pose matrices.
void export_trajectory(const std::string& json_path, const GlobalMap& map);

// Per-frame 2x3 matrices, one "a,b,tx,c,d,ty" line per frame.
std::vector<AffineTransform2D> load_odometry_csv(const std::string& path);

}  // namespace freespace
