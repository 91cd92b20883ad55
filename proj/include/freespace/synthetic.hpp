#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "freespace/disparity.hpp"
#include "freespace/flow_model.hpp"
#include "freespace/geometry.hpp"
#include "freespace/image.hpp"
#include "freespace/segmentation.hpp"

namespace freespace {

class AffineTransform2D;

// Axis-aligned box resting on the ground plane; a nonzero velocity makes
// it dynamic (meters per frame, world X/Z).
struct SceneBox {
  double center_x = 0.0;
  double center_z = 10.0;
  double size_x = 1.0;
  double size_z = 1.0;
  double height = 1.5;
  double velocity_x = 0.0;
  double velocity_z = 0.0;

  bool dynamic() const { return velocity_x != 0.0 || velocity_z != 0.0; }
  double center_x_at(int frame) const { return center_x + frame * velocity_x; }
  double center_z_at(int frame) const { return center_z + frame * velocity_z; }
};

// Camera pose on the world ground plane; yaw 0 looks along +Z.
struct EgoPose {
  double x = 0.0;
  double z = 0.0;
  double yaw = 0.0;
};

struct SceneSpec {
  CameraIntrinsics camera{500.0, 319.5, 119.5, 0.5};
  int image_width = 640;
  int image_height = 240;
  double camera_height_m = 1.2;  // ground plane below the optical center
  double max_depth_m = 60.0;     // rendering horizon
  std::vector<SceneBox> boxes;
  std::vector<EgoPose> ego;  // one pose per frame
  std::uint64_t texture_seed = 1;

  int frame_count() const { return static_cast<int>(ego.size()); }
};

SceneSpec load_scene_spec(const std::string& path);
void save_scene_spec(const std::string& path, const SceneSpec& spec);

// Object id per pixel: no hit, the ground plane, or a box index.
constexpr std::int8_t kHitNone = -2;
constexpr std::int8_t kHitGround = -1;

struct SceneFrame {
  DisparityImage disparity;      // exact f*b/Z at every hit pixel
  ImageU8 left;                  // textured render
  Image<std::int8_t> hit_object;
  Image<double> hit_x, hit_y, hit_z;     // world coordinates of each hit
  Image<float> flow_u, flow_v;           // flow to the next frame (NaN: none)
  Image<std::uint8_t> dynamic_mask;      // pixel lies on a dynamic box
  std::vector<float> nearest_box_disparity;  // per column; 0 = no box
  std::vector<std::string> diagnostics;      // e.g. boxes behind the camera
};

// Analytic ray casting against the plane and boxes; everything is exact up
// to floating rounding, no sampling noise. Flow fields are empty for the
// last frame.
SceneFrame generate_scene(const SceneSpec& spec, int frame);

// Ground-truth free-space profile of a frame on the given u-disparity grid.
FreeSpaceProfile gt_profile(const SceneFrame& frame, const GridGeometry& g);

// World pose of the camera as a ground-plane transform (camera -> world).
AffineTransform2D camera_to_world(const EgoPose& pose);

// Labeled synthetic flow set for exercising the polynomial fit: inliers
// follow the model plus Gaussian noise, outliers get an extra fixed psi
// offset. Throws if a target magnitude comes out negative.
struct PlantedFlowField {
  std::vector<FlowSample> samples;
  std::vector<bool> is_outlier;
};
PlantedFlowField planted_flow_field(const PolynomialFlowModel& model,
                                    int n_inliers, int n_outliers,
                                    double noise_sigma, double outlier_offset,
                                    std::uint64_t seed,
                                    double u_extent = 300.0,
                                    double v_extent = 120.0);

}  // namespace freespace
