#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "freespace/disparity.hpp"
#include "freespace/features.hpp"
#include "freespace/flow_model.hpp"
#include "freespace/geometry.hpp"
#include "freespace/mapping.hpp"
#include "freespace/occupancy_grid.hpp"

namespace freespace {

struct FrameInput {
  std::string left;       // intensity image (PNG/PGM), required for features
  std::string right;      // optional; enables the block matcher
  std::string disparity;  // optional; preferred over block matching
};

enum class SegmentationMethod { kThreshold, kTransition };
enum class TransformSource { kFeatures, kOdometry };

// Every field has a documented default; unknown JSON keys are rejected with
// the offending key named. CLI flags override their config keys.
struct PipelineConfig {
  int threads = 0;  // 0 = hardware concurrency
  std::string simd = "auto";  // auto | scalar | avx2

  CameraIntrinsics camera{721.5377, 609.5593, 172.854, 0.5372};  // KITTI-ish

  // u-disparity grid; -1 derives the extent from the image width.
  int grid_cols = -1;
  int max_disparity = 128;
  // metric grid
  double metric_cell_m = 0.2;
  double metric_depth_m = 40.0;
  double metric_lateral_m = 20.0;

  CovarianceModel covariance;
  int stride_u = 1;
  int stride_v = 1;

  NormalizationMode normalization = NormalizationMode::kStandard;
  double truncation_sigma = 4.0;

  SegmentationMethod segmentation = SegmentationMethod::kThreshold;
  double threshold = 40.0;  // scene-dependent; Fig-4-scaled default
  int transition_ordinal = 2;
  bool median_filter = false;
  int median_radius = 2;

  BlockMatchParams block_match;
  MatchParams features;

  int ransac_degree = 1;
  RansacConfig ransac;

  TransformSource transform_source = TransformSource::kFeatures;
  TransformModel transform_model = TransformModel::kRigid;
  std::string odometry_csv;

  double map_threshold = 2.0;  // metric-grid occupancy rule
  // Ground-plane geometry for the bird's-eye map: only points at least
  // min_obstacle_height_m above the road feed the obstacle evidence.
  double camera_height_m = 1.65;
  double min_obstacle_height_m = 0.3;

  std::string output_dir = "out";
  std::vector<FrameInput> frames;

  GridGeometry u_disparity_geometry(int image_width) const;
  GridGeometry metric_geometry() const;
};

PipelineConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const PipelineConfig& cfg);

PipelineConfig load_config(const std::string& path);

}  // namespace freespace
