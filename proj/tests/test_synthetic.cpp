#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "freespace/mapping.hpp"
#include "freespace/synthetic.hpp"

using namespace freespace;

namespace {

SceneSpec basic_spec(int frames) {
  SceneSpec spec;
  spec.camera = CameraIntrinsics(200.0, 159.5, 59.5, 0.5);
  spec.image_width = 320;
  spec.image_height = 120;
  spec.camera_height_m = 1.2;
  spec.max_depth_m = 50.0;
  spec.ego.assign(frames, EgoPose{});
  return spec;
}

// Independent projection: world point -> pixel under a given pose.
Eigen::Vector2d project_ref(const SceneSpec& spec, const EgoPose& pose,
                            const Eigen::Vector3d& p) {
  const Eigen::Vector3d cam(pose.x, 0.0, pose.z);
  const Eigen::Vector3d right(std::cos(pose.yaw), 0.0, -std::sin(pose.yaw));
  const Eigen::Vector3d fwd(std::sin(pose.yaw), 0.0, std::cos(pose.yaw));
  const Eigen::Vector3d q = p - cam;
  const double z = q.dot(fwd);
  return {spec.camera.focal_px * q.dot(right) / z + spec.camera.cu,
          spec.camera.focal_px * q.y() / z + spec.camera.cv};
}

}  // namespace

TEST_CASE("plane-only scene: exact ground disparity, no boundary") {
  SceneSpec spec = basic_spec(1);
  const SceneFrame frame = generate_scene(spec, 0);

  // Rows below the horizon hit the plane at depth h / dy; disparity is
  // exactly f*b/depth.
  int checked = 0;
  for (int py = 0; py < spec.image_height; ++py) {
    const double dy = (py - spec.camera.cv) / spec.camera.focal_px;
    for (int px = 0; px < spec.image_width; px += 37) {
      if (dy <= 0.0) {
        CHECK_FALSE(frame.disparity.valid(px, py));
        continue;
      }
      const double depth = spec.camera_height_m / dy;
      if (depth > spec.max_depth_m) {
        CHECK_FALSE(frame.disparity.valid(px, py));
        continue;
      }
      REQUIRE(frame.disparity.valid(px, py));
      const double expect =
          spec.camera.focal_px * spec.camera.baseline_m / depth;
      CHECK(frame.disparity.at(px, py) ==
            doctest::Approx(expect).epsilon(1e-6));
      ++checked;
    }
  }
  CHECK(checked > 100);

  const GridGeometry g = GridGeometry::u_disparity(spec.image_width, 100);
  const FreeSpaceProfile gt = gt_profile(frame, g);
  for (int i = 0; i < g.n_cols(); ++i)
    CHECK_FALSE(gt.boundary(i).has_value());
}

TEST_CASE("single box produces a boundary at its depth row") {
  SceneSpec spec = basic_spec(1);
  SceneBox box;
  box.center_x = 0.0;
  box.center_z = 10.0;
  box.size_x = 2.0;
  box.size_z = 1.0;
  box.height = 1.0;
  spec.boxes.push_back(box);
  const SceneFrame frame = generate_scene(spec, 0);

  const GridGeometry g = GridGeometry::u_disparity(spec.image_width, 100);
  const FreeSpaceProfile gt = gt_profile(frame, g);
  // Front face at z = 9.5: disparity f*b / 9.5.
  const double d_front =
      spec.camera.focal_px * spec.camera.baseline_m / 9.5;
  const auto front_cell = g.cell_at(spec.camera.cu, d_front);
  REQUIRE(front_cell.has_value());

  // Box spans x in [-1, 1] at z=9.5: pixel columns cu +- f/9.5.
  const int px_lo = static_cast<int>(
      std::ceil(spec.camera.cu - spec.camera.focal_px / 9.5));
  const int px_hi = static_cast<int>(
      std::floor(spec.camera.cu + spec.camera.focal_px / 9.5));
  int with_boundary = 0;
  for (int i = 0; i < g.n_cols(); ++i) {
    if (i >= px_lo + 1 && i <= px_hi - 1) {
      REQUIRE(gt.boundary(i).has_value());
      CHECK(*gt.boundary(i) == front_cell->j);
      ++with_boundary;
    } else if (i < px_lo - 1 || i > px_hi + 1) {
      CHECK_FALSE(gt.boundary(i).has_value());
    }
  }
  CHECK(with_boundary > 20);
}

TEST_CASE("flow matches an independent finite-difference projection") {
  SceneSpec spec = basic_spec(2);
  spec.ego[1] = EgoPose{0.15, 0.5, 0.02};  // move and turn slightly
  SceneBox box;
  box.center_x = -1.0;
  box.center_z = 8.0;
  box.velocity_x = 0.3;
  spec.boxes.push_back(box);
  const SceneFrame frame = generate_scene(spec, 0);

  int checked = 0;
  for (int py = 0; py < spec.image_height; py += 3) {
    for (int px = 0; px < spec.image_width; px += 5) {
      if (frame.hit_object(px, py) == kHitNone) continue;
      if (std::isnan(frame.flow_u(px, py))) continue;
      Eigen::Vector3d p(frame.hit_x(px, py), frame.hit_y(px, py),
                        frame.hit_z(px, py));
      if (frame.hit_object(px, py) >= 0 &&
          spec.boxes[frame.hit_object(px, py)].dynamic()) {
        p.x() += spec.boxes[frame.hit_object(px, py)].velocity_x;
        p.z() += spec.boxes[frame.hit_object(px, py)].velocity_z;
      }
      const Eigen::Vector2d p1 = project_ref(spec, spec.ego[1], p);
      CHECK(frame.flow_u(px, py) ==
            doctest::Approx(p1.x() - px).epsilon(1e-6).scale(1e-3));
      CHECK(frame.flow_v(px, py) ==
            doctest::Approx(p1.y() - py).epsilon(1e-6).scale(1e-3));
      ++checked;
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("dynamic mask marks exactly the moving box pixels") {
  SceneSpec spec = basic_spec(2);
  SceneBox mover;
  mover.center_x = 1.0;
  mover.center_z = 6.0;
  mover.velocity_x = -0.5;
  spec.boxes.push_back(mover);
  SceneBox still;
  still.center_x = -2.0;
  still.center_z = 12.0;
  spec.boxes.push_back(still);
  const SceneFrame frame = generate_scene(spec, 0);
  for (int py = 0; py < spec.image_height; ++py) {
    for (int px = 0; px < spec.image_width; ++px) {
      const bool on_mover = frame.hit_object(px, py) == 0;
      CHECK((frame.dynamic_mask(px, py) != 0) == on_mover);
    }
  }
}

TEST_CASE("box behind the camera is skipped with a diagnostic") {
  SceneSpec spec = basic_spec(1);
  SceneBox behind;
  behind.center_x = 0.0;
  behind.center_z = -5.0;
  spec.boxes.push_back(behind);
  const SceneFrame frame = generate_scene(spec, 0);
  REQUIRE(frame.diagnostics.size() == 1);
  CHECK(frame.diagnostics[0].find("behind camera") != std::string::npos);
  for (int py = 0; py < spec.image_height; ++py)
    for (int px = 0; px < spec.image_width; ++px)
      CHECK(frame.hit_object(px, py) != 0);
}

TEST_CASE("planted flow field basics") {
  PolynomialFlowModel model;
  model.degree = 1;
  model.coefficients = {0.01, 0.02, 25.0};

  const PlantedFlowField clean = planted_flow_field(model, 50, 0, 0.0, 0.0,
                                                    11);
  REQUIRE(clean.samples.size() == 50);
  for (std::size_t k = 0; k < clean.samples.size(); ++k) {
    CHECK_FALSE(clean.is_outlier[k]);
    const FlowSample& s = clean.samples[k];
    CHECK(s.psi == doctest::Approx(evaluate_model(model, s.u, s.v))
                       .epsilon(1e-12));
  }

  const PlantedFlowField split =
      planted_flow_field(model, 80, 20, 0.5, 50.0, 12);
  int outliers = 0;
  for (bool b : split.is_outlier) outliers += b;
  CHECK(outliers == 20);

  // Bit-identical regeneration for a fixed seed.
  const PlantedFlowField again =
      planted_flow_field(model, 80, 20, 0.5, 50.0, 12);
  for (std::size_t k = 0; k < split.samples.size(); ++k) {
    CHECK(split.samples[k].u == again.samples[k].u);
    CHECK(split.samples[k].psi == again.samples[k].psi);
  }
}

TEST_CASE("scene spec JSON round trips") {
  SceneSpec spec = basic_spec(3);
  spec.ego[1] = EgoPose{0.1, 0.4, 0.01};
  spec.ego[2] = EgoPose{0.2, 0.8, 0.02};
  SceneBox box;
  box.center_x = 2.0;
  box.center_z = 9.0;
  box.velocity_z = -0.25;
  spec.boxes.push_back(box);

  const auto path =
      (std::filesystem::temp_directory_path() / "scene_spec.json").string();
  save_scene_spec(path, spec);
  const SceneSpec back = load_scene_spec(path);
  CHECK(back.image_width == spec.image_width);
  CHECK(back.camera.focal_px == spec.camera.focal_px);
  REQUIRE(back.boxes.size() == 1);
  CHECK(back.boxes[0].velocity_z == -0.25);
  REQUIRE(back.ego.size() == 3);
  CHECK(back.ego[2].z == 0.8);

  // Identical renders from the round-tripped spec.
  const SceneFrame a = generate_scene(spec, 1);
  const SceneFrame b = generate_scene(back, 1);
  CHECK(a.left == b.left);
  CHECK(a.disparity.values() == b.disparity.values());
  std::remove(path.c_str());
}
