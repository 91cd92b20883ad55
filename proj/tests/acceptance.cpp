// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Artifacts for the determinism criterion are emitted under
// a temp directory and byte-compared across reruns.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <algorithm>
#include <sstream>
#include <vector>

#include "freespace/config.hpp"
#include "freespace/features.hpp"
#include "freespace/image_io.hpp"
#include "freespace/kernels.hpp"
#include "freespace/mapping.hpp"
#include "freespace/occupancy_grid.hpp"
#include "freespace/pipeline.hpp"
#include "freespace/rng.hpp"
#include "freespace/segmentation.hpp"
#include "freespace/synthetic.hpp"

using namespace freespace;
namespace fsys = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) +
                                abs_floor;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------
// Criterion 1: golden 8x8 sample grid, threshold 40, near-to-far scan;
// expected per-column first-occupied values from the reference pattern.
// ---------------------------------------------------------------------

Outcome criterion1() {
  Outcome out;
  const std::vector<std::vector<double>> columns = {
      {0, 0, 0.54, 2.43, 45.3, 121, 442, 43},
      {1.5, 2.9, 4.3, 1.4, 5.2, 22, 56.2, 241},
      {4, 0.3, 23, 112, 234, 112, 12, 24},
      {4, 7, 3, 4, 78, 45, 32, 31},
      {4, 12, 34, 56, 223, 454, 21, 2},
      {8, 17, 14, 6, 45, 32, 45, 343},
      {2, 23, 21, 11, 90, 13, 13, 45},
      {5, 2, 5, 67, 4, 1, 54, 21},
  };
  const std::vector<double> expected_values = {45.3, 56.2, 112, 78,
                                               454,  45,   90, 67};

  OccupancyGrid grid(GridGeometry(AxisMode::kUDisparity, 8, 8, 0.0, 8.0,
                                  1.0, -1.0));
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) grid.at(i, j) = columns[i][j];

  const auto start = Clock::now();
  const FreeSpaceProfile profile = threshold_segment(grid, 40.0);
  const double elapsed = seconds_since(start);

  for (int i = 0; i < 8; ++i) {
    // Expected boundary row: position of the reference first-occupied value.
    int expected_row = -1;
    for (int j = 0; j < 8; ++j)
      if (columns[i][j] == expected_values[i]) {
        expected_row = j;
        break;
      }
    if (!profile.boundary(i)) {
      out.fail("column " + std::to_string(i) + ": no boundary found");
      continue;
    }
    const int got = *profile.boundary(i);
    if (got != expected_row) {
      out.fail("column " + std::to_string(i) + ": first occupied value " +
               fmt(columns[i][got]) + " at row " + std::to_string(got) +
               ", reference pattern says " + fmt(expected_values[i]) +
               " at row " + std::to_string(expected_row));
      continue;
    }
    // Full grey/white pattern below/above the boundary.
    for (int j = 0; j < 8; ++j) {
      const CellLabel want =
          j >= expected_row ? CellLabel::kOccupied : CellLabel::kFree;
      if (profile.label(i, j) != want)
        out.fail("cell (" + std::to_string(i) + "," + std::to_string(j) +
                 ") label mismatch");
    }
  }
  if (elapsed >= 1e-3)
    out.fail("runtime " + fmt(elapsed * 1e3) + "ms >= 1ms");
  else
    out.note("runtime " + fmt(elapsed * 1e6) + "us");
  return out;
}

// ---------------------------------------------------------------------
// Criterion 2: grid oracle equivalence on 50 random measurements.
// ---------------------------------------------------------------------

Outcome criterion2() {
  Outcome out;
  const GridGeometry g = GridGeometry::u_disparity(32, 32);
  Rng rng(20260810);
  MeasurementSet ms;
  for (int k = 0; k < 50; ++k) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    cov.diagonal() << rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0),
        rng.uniform(0.5, 4.0);
    ms.measurements.emplace_back(rng.uniform(0.0, 31.0),
                                 rng.uniform(0.0, 100.0),
                                 rng.uniform(1.0, 31.0), cov);
  }

  const auto start = Clock::now();
  GridBuildOptions opt;
  opt.truncation_sigma = std::numeric_limits<double>::infinity();
  const OccupancyGrid fast = build_grid(ms, g, opt);
  opt.truncation_sigma = 6.0;
  const OccupancyGrid truncated = build_grid(ms, g, opt);

  OccupancyGrid oracle(g);
  for (int j = 0; j < g.n_rows(); ++j)
    for (int i = 0; i < g.n_cols(); ++i)
      for (const Measurement& m : ms.measurements)
        oracle.at(i, j) +=
            cell_likelihood({i, j}, m, g, NormalizationMode::kStandard);
  const double elapsed = seconds_since(start);

  double grid_max = 0.0;
  for (double v : oracle.values()) grid_max = std::max(grid_max, v);

  int bad_full = 0, bad_trunc = 0;
  for (int j = 0; j < g.n_rows(); ++j) {
    for (int i = 0; i < g.n_cols(); ++i) {
      if (!rel_close(fast.at(i, j), oracle.at(i, j), 1e-9, 1e-280))
        ++bad_full;
      if (!rel_close(truncated.at(i, j), fast.at(i, j), 1e-6,
                     1e-6 * grid_max))
        ++bad_trunc;
    }
  }
  if (bad_full > 0)
    out.fail(std::to_string(bad_full) + " cells beyond 1e-9 of brute force");
  if (bad_trunc > 0)
    out.fail(std::to_string(bad_trunc) + " cells beyond 1e-6 after 6-sigma");
  if (elapsed >= 1.0)
    out.fail("runtime " + fmt(elapsed) + "s >= 1s");
  else
    out.note("runtime " + fmt(elapsed * 1e3) + "ms");
  return out;
}

// ---------------------------------------------------------------------
// Criterion 3: Gaussian spot values and the normalization-mode factor.
// ---------------------------------------------------------------------

Outcome criterion3() {
  Outcome out;
  const Eigen::Matrix3d identity = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d tau4 = Eigen::Matrix3d::Identity();
  tau4(2, 2) = 4.0;

  struct Spot {
    Eigen::Vector3d delta;
    Eigen::Matrix3d tau;
    double expect;  // high-precision closed-form evaluation
  };
  const std::vector<Spot> spots = {
      {{0, 0, 0}, identity, 0.06349363593424097},
      {{1, 0, 0}, identity, 0.038510836890748944},
      {{1, 0, 2}, tau4, 0.011679001652715789},
  };
  for (std::size_t k = 0; k < spots.size(); ++k) {
    const double got = gaussian_likelihood(spots[k].delta, spots[k].tau,
                                           NormalizationMode::kStandard);
    if (!rel_close(got, spots[k].expect, 1e-12))
      out.fail("spot " + std::to_string(k) + ": got " + fmt(got) +
               ", expected " + fmt(spots[k].expect));
  }

  // Modes differ by exactly sqrt(|tau|) (amounts to one extra division).
  const double std4 =
      gaussian_likelihood({1, 0, 2}, tau4, NormalizationMode::kStandard);
  const double lit4 =
      gaussian_likelihood({1, 0, 2}, tau4, NormalizationMode::kPaperLiteral);
  if (std4 != lit4 * 2.0)  // sqrt(det) = 2 exactly
    out.fail("mode factor mismatch on diag(1,1,4)");
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix3d tau = Eigen::Matrix3d::Zero();
    tau.diagonal() << rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0),
        rng.uniform(0.2, 3.0);
    const Eigen::Vector3d d(rng.uniform(-2, 2), 0, rng.uniform(-2, 2));
    const double s = gaussian_likelihood(d, tau,
                                         NormalizationMode::kStandard);
    const double l = gaussian_likelihood(d, tau,
                                         NormalizationMode::kPaperLiteral);
    const double sqrt_det = std::sqrt(tau.diagonal().prod());
    if (!rel_close(s, l * sqrt_det, 1e-14))
      out.fail("mode factor off at trial " + std::to_string(trial));
  }
  return out;
}

// ---------------------------------------------------------------------
// Criterion 4: RANSAC plant-and-recover sweep over degrees 1..3 with the
// reference sampling parameters (40% subsets, 20 iterations).
// ---------------------------------------------------------------------

PolynomialFlowModel planted_model(int degree) {
  PolynomialFlowModel m;
  m.degree = degree;
  switch (degree) {
    case 1:
      m.coefficients = {0.01, 0.02, 30.0};
      break;
    case 2:
      m.coefficients = {2e-5, 5e-5, 4e-5, 0.01, 0.02, 30.0};
      break;
    default:
      m.coefficients = {3e-7, 1e-6, 2e-7, 3e-7, 2e-5,
                        5e-5, 4e-5, 0.01, 0.02, 30.0};
  }
  return m;
}

Outcome criterion4(const std::string& artifact_dir) {
  Outcome out;
  const auto start = Clock::now();
  nlohmann::json artifact;

  for (const int degree : {1, 2, 3}) {
    const PolynomialFlowModel truth = planted_model(degree);
    RansacConfig cfg;
    cfg.sample_fraction = 0.4;
    cfg.iterations = 20;
    // The joint 40% subset fit carries a bias of about offset * outlier
    // fraction (~10px here), so the acceptance threshold sits between that
    // bias and the planted +50px separation.
    cfg.inlier_epsilon = 20.0;

    int good_trials = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const PlantedFlowField field = planted_flow_field(
          truth, 160, 40, 0.5, 50.0, 900000 + degree * 1000 + seed);
      cfg.seed = seed;
      const RansacResult result =
          fit_flow_model_ransac(field.samples, degree, cfg);
      int correct = 0;
      for (std::size_t k = 0; k < field.samples.size(); ++k)
        correct += (result.inlier[k] == !field.is_outlier[k]);
      if (correct >= 198) ++good_trials;  // >= 99% of 200
      if (seed == 0) {
        artifact["degree_" + std::to_string(degree)] = {
            {"coefficients", result.model.coefficients},
            {"inliers", std::count(result.inlier.begin(),
                                   result.inlier.end(), true)}};
      }
    }
    if (good_trials < 99)
      out.fail("degree " + std::to_string(degree) + ": only " +
               std::to_string(good_trials) + "/100 trials at >=99% accuracy");

    // Noiseless rerun: refit coefficients within 5% of planted.
    const PlantedFlowField clean = planted_flow_field(
        truth, 160, 40, 0.0, 50.0, 880000 + degree);
    cfg.seed = 7;
    const RansacResult result =
        fit_flow_model_ransac(clean.samples, degree, cfg);
    for (std::size_t k = 0; k < truth.coefficients.size(); ++k) {
      const double rel = std::abs(result.model.coefficients[k] -
                                  truth.coefficients[k]) /
                         std::abs(truth.coefficients[k]);
      if (rel > 0.05)
        out.fail("degree " + std::to_string(degree) + " coefficient " +
                 std::to_string(k) + " off by " + fmt(100 * rel) + "%");
    }
  }

  const double elapsed = seconds_since(start);
  if (elapsed >= 5.0)
    out.fail("runtime " + fmt(elapsed) + "s >= 5s");
  else
    out.note("runtime " + fmt(elapsed) + "s");

  std::ofstream f(artifact_dir + "/criterion4.json");
  f << artifact.dump(2) << "\n";
  return out;
}

// ---------------------------------------------------------------------
// Criterion 5: stationary camera, 15 moving keypoints at psi = 10.
// ---------------------------------------------------------------------

Outcome criterion5(const std::string& artifact_dir) {
  Outcome out;
  nlohmann::json artifact = nlohmann::json::array();
  int perfect = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng gen(50000 + seed);
    std::vector<FlowSample> samples;
    std::vector<bool> moving;
    for (int k = 0; k < 100; ++k) {
      samples.emplace_back(gen.uniform(-300, 300), gen.uniform(-120, 120),
                           0.0, 0.0);
      moving.push_back(false);
    }
    for (int k = 0; k < 15; ++k) {
      samples.emplace_back(gen.uniform(-300, 300), gen.uniform(-120, 120),
                           10.0, 0.0);
      moving.push_back(true);
    }
    RansacConfig cfg;  // defaults: 40%, 20 iterations, epsilon 2.0
    cfg.seed = seed;
    const RansacResult result = fit_flow_model_ransac(samples, 1, cfg);
    const auto labels =
        classify_dynamic(samples, result.model, cfg.inlier_epsilon);
    bool exact = true;
    int flagged = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const bool dyn = labels[k] == MotionLabel::kDynamic;
      flagged += dyn;
      exact &= (dyn == moving[k]);
    }
    perfect += exact;
    if (seed < 5) artifact.push_back(flagged);
  }
  if (perfect != 100)
    out.fail("exact segmentation in only " + std::to_string(perfect) +
             "/100 seeds");
  std::ofstream f(artifact_dir + "/criterion5.json");
  f << artifact.dump() << "\n";
  return out;
}

// ---------------------------------------------------------------------
// Criterion 6: rigid transform recovery on exact correspondences.
// ---------------------------------------------------------------------

Outcome criterion6(const std::string& artifact_dir) {
  Outcome out;
  Rng rng(60606);
  nlohmann::json artifact = nlohmann::json::array();
  for (int trial = 0; trial < 100; ++trial) {
    const double angle = rng.uniform(-10.0, 10.0) * M_PI / 180.0;
    const Eigen::Vector2d trans(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const AffineTransform2D truth = AffineTransform2D::rigid(angle, trans);
    std::vector<PointPair> pairs;
    const int n = 10 + static_cast<int>(rng.index(20));
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector2d p(rng.uniform(-15, 15), rng.uniform(1, 35));
      pairs.push_back({p, truth.apply(p)});
    }
    const AffineTransform2D got = estimate_transform(pairs);
    const double angle_err = std::abs(got.rotation_angle() - angle);
    const double trans_err = (got.translation() - trans).norm();
    if (angle_err >= 1e-6 || trans_err >= 1e-6)
      out.fail("trial " + std::to_string(trial) + ": angle err " +
               fmt(angle_err) + ", translation err " + fmt(trans_err));
    if (trial < 5)
      artifact.push_back({{"angle", got.rotation_angle()},
                          {"tx", got.translation().x()},
                          {"ty", got.translation().y()}});
  }
  std::ofstream f(artifact_dir + "/criterion6.json");
  f << artifact.dump(2) << "\n";
  return out;
}

// ---------------------------------------------------------------------
// Criterion 7: end-to-end synthetic mapping with a crossing box.
// ---------------------------------------------------------------------

SceneSpec corridor_scene(bool with_box) {
  SceneSpec spec;
  spec.camera = CameraIntrinsics(300.0, 239.5, 89.5, 0.5);
  spec.image_width = 480;
  spec.image_height = 180;
  spec.camera_height_m = 1.2;
  spec.max_depth_m = 45.0;
  SceneBox left_wall;
  left_wall.center_x = -3.0;
  left_wall.center_z = 12.0;
  left_wall.size_x = 0.25;
  left_wall.size_z = 20.0;
  left_wall.height = 2.0;
  spec.boxes.push_back(left_wall);
  SceneBox right_wall = left_wall;
  right_wall.center_x = 3.0;
  spec.boxes.push_back(right_wall);
  if (with_box) {
    SceneBox box;
    box.center_x = -2.2;
    box.center_z = 8.0;
    box.size_x = 1.0;
    box.size_z = 1.0;
    box.height = 1.2;
    box.velocity_x = 0.5;
    spec.boxes.push_back(box);
  }
  for (int f = 0; f < 10; ++f)
    spec.ego.push_back(EgoPose{0.0, 0.2 * f, 0.0});
  return spec;
}

PipelineConfig corridor_config(const SceneSpec& spec, const fsys::path& dir,
                               const std::string& input_prefix,
                               const std::string& out_name) {
  PipelineConfig cfg;
  cfg.camera = spec.camera;
  cfg.threads = 0;
  cfg.max_disparity = 110;
  cfg.metric_cell_m = 0.25;
  cfg.metric_depth_m = 30.0;
  cfg.metric_lateral_m = 6.0;
  cfg.threshold = 10.0;
  cfg.map_threshold = 5.0;
  cfg.camera_height_m = 1.2;
  // The rendered disparity is exact, so the measurement covariance is much
  // tighter than the real-sensor default; this keeps depth smear along
  // grazing rays inside the wall cells.
  cfg.covariance.sigma_u = 0.25;
  cfg.covariance.sigma_v = 0.25;
  cfg.covariance.sigma_d = 0.25;
  cfg.stride_v = 1;
  cfg.ransac_degree = 3;
  cfg.ransac.inlier_epsilon = 3.0;
  cfg.ransac.seed = 424242;
  cfg.features.harris.quality_level = 3e-5;
  cfg.features.min_ncc = 0.85;
  cfg.features.subpixel = true;
  cfg.features.search_radius_u = 28;
  cfg.features.patch_radius = 3;  // less template drift under expansion
  cfg.features.harris.nms_radius = 1;  // dense coverage of the moving box
  cfg.features.harris.max_corners = 2000;
  cfg.output_dir = (dir / out_name).string();
  for (int f = 0; f < spec.frame_count(); ++f) {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "%02d", f);
    const SceneFrame frame = generate_scene(spec, f);
    FrameInput input;
    input.left = (dir / (input_prefix + "_left_" + tag + ".png")).string();
    input.disparity =
        (dir / (input_prefix + "_disp_" + tag + ".png")).string();
    write_gray8(input.left, frame.left);
    save_disparity(input.disparity, frame.disparity);
    cfg.frames.push_back(input);
  }
  return cfg;
}

// Decode a tri-level map render back into states, keyed by global cell.
std::map<std::pair<int, int>, CellState> decode_map(
    const std::string& out_dir) {
  std::ifstream in(out_dir + "/run_report.json");
  nlohmann::json report;
  in >> report;
  const auto& b = report.at("map").at("bounds");
  const int gi0 = b[0].get<int>(), gj0 = b[1].get<int>();
  const int gj1 = b[3].get<int>();
  const ImageU8 img = read_gray8(out_dir + "/map.pgm");
  std::map<std::pair<int, int>, CellState> states;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int gi = gi0 + x;
      const int gj = gj1 - y;
      const std::uint8_t v = img(x, y);
      states[{gi, gj}] = v == 255 ? CellState::kFree
                        : v == 0  ? CellState::kOccupied
                                  : CellState::kUnknown;
      (void)gj0;
    }
  }
  return states;
}

Outcome criterion7(const fsys::path& dir, const std::string& out_name) {
  Outcome out;
  const SceneSpec dynamic_scene = corridor_scene(true);
  const SceneSpec static_scene = corridor_scene(false);

  const auto start = Clock::now();
  const PipelineConfig dyn_cfg =
      corridor_config(dynamic_scene, dir, "dyn", out_name);
  run_pipeline(dyn_cfg);
  const double elapsed = seconds_since(start);

  const PipelineConfig static_cfg =
      corridor_config(static_scene, dir, "static", out_name + "_oracle");
  run_pipeline(static_cfg);

  const auto dyn_map = decode_map((dir / out_name).string());
  const auto oracle_map = decode_map((dir / (out_name + "_oracle")).string());

  // State agreement over cells observed (non-unknown) in both maps.
  long observed = 0, matched = 0;
  for (const auto& [cell, state] : dyn_map) {
    if (state == CellState::kUnknown) continue;
    const auto it = oracle_map.find(cell);
    if (it == oracle_map.end() || it->second == CellState::kUnknown)
      continue;
    ++observed;
    matched += (state == it->second);
  }
  const double agreement =
      observed > 0 ? static_cast<double>(matched) / observed : 0.0;
  out.note("state agreement " + fmt(100.0 * agreement) + "% over " +
           std::to_string(observed) + " cells");
  if (agreement < 0.98)
    out.fail("agreement below 98%");

  // The crossing box's cells pass through unknown and end free. Drive the
  // same stages manually to observe intermediate states.
  GlobalMap map(dyn_cfg.metric_cell_m, dyn_cfg.map_threshold);
  const GridGeometry metric_geom = dyn_cfg.metric_geometry();
  GridBuildOptions build_opt;
  build_opt.normalization = dyn_cfg.normalization;
  build_opt.truncation_sigma = dyn_cfg.truncation_sigma;

  AffineTransform2D pose, prev_pose;
  ImageU8 prev_left;
  DisparityImage prev_disp;
  bool transient_unknown_seen = false;
  std::vector<std::pair<int, int>> transient_cells;

  for (int f = 0; f < dynamic_scene.frame_count(); ++f) {
    const ImageU8 left = read_gray8(dyn_cfg.frames[f].left);
    const DisparityImage disp = load_disparity(dyn_cfg.frames[f].disparity);
    const MeasurementSet ms = measurements_from_disparity(
        disp, dyn_cfg.stride_u, dyn_cfg.stride_v, dyn_cfg.covariance);
    const MeasurementSet obstacles =
        filter_above_ground(ms, dyn_cfg.camera, dyn_cfg.camera_height_m,
                            dyn_cfg.min_obstacle_height_m);
    const OccupancyGrid metric_grid =
        build_grid(obstacles, metric_geom, dyn_cfg.camera, build_opt);
    const auto hits = count_measurement_hits(ms, metric_geom,
                                             dyn_cfg.camera);

    if (f == 0) {
      map.fuse(metric_grid, hits, pose);
    } else {
      const auto samples = detect_and_match(prev_left, left,
                                            dyn_cfg.features);
      RansacConfig rc = dyn_cfg.ransac;
      rc.seed = dyn_cfg.ransac.seed + static_cast<std::uint64_t>(f - 1);
      const RansacResult result =
          fit_flow_model_ransac(samples, dyn_cfg.ransac_degree, rc);
      const auto labels =
          classify_dynamic(samples, result.model, rc.inlier_epsilon);
      const GroundPairs pairs = ground_pairs_from_samples(
          samples, labels, prev_disp, disp, dyn_cfg.camera);
      const AffineTransform2D inter = estimate_transform(pairs.pairs);
      std::vector<Eigen::Vector2d> prev_px, cur_px;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        if (labels[k] != MotionLabel::kDynamic) continue;
        prev_px.push_back({samples[k].x_px, samples[k].y_px});
        cur_px.push_back({samples[k].x_px + samples[k].f_u,
                          samples[k].y_px + samples[k].f_v});
      }
      map.mark_dynamic_cells(prev_px, prev_disp, dyn_cfg.camera, prev_pose);
      pose = pose * inter.inverse();
      map.fuse(metric_grid, hits, pose);
      map.mark_dynamic_cells(cur_px, disp, dyn_cfg.camera, pose);

      // Cells of dynamic keypoints that really sit on the box at frame f:
      // they must read unknown now and free once the box has moved on.
      const SceneBox& box = dynamic_scene.boxes[2];
      for (const Eigen::Vector2d& px : cur_px) {
        const int xi = static_cast<int>(std::lround(px.x()));
        const int yi = static_cast<int>(std::lround(px.y()));
        if (!disp.values().in_bounds(xi, yi) || !disp.valid(xi, yi))
          continue;
        const Measurement m(px.x(), px.y(), disp.at(xi, yi),
                            Eigen::Matrix3d::Identity());
        const Eigen::Vector2d world = pose.apply(
            ground_point(m, dyn_cfg.camera));
        const double margin = 0.3;
        if (std::abs(world.x() - box.center_x_at(f)) >
                0.5 * box.size_x + margin ||
            std::abs(world.y() - box.center_z) > 0.5 * box.size_z + margin)
          continue;
        const Eigen::Vector2i cell = map.cell_index(world);
        if (map.state(cell.x(), cell.y()) == CellState::kUnknown) {
          transient_unknown_seen = true;
          if (f <= 7)  // clear of the box's final resting position
            transient_cells.push_back({cell.x(), cell.y()});
        }
      }
    }
    prev_left = left;
    prev_disp = disp;
    prev_pose = pose;
  }

  if (!transient_unknown_seen)
    out.fail("box cells never passed through unknown");
  std::sort(transient_cells.begin(), transient_cells.end());
  transient_cells.erase(
      std::unique(transient_cells.begin(), transient_cells.end()),
      transient_cells.end());
  // Cells under the box's final footprint never get re-observed.
  const SceneBox& box = dynamic_scene.boxes[2];
  std::erase_if(transient_cells, [&](const std::pair<int, int>& c) {
    const double x = c.first * dyn_cfg.metric_cell_m;
    const double z = c.second * dyn_cfg.metric_cell_m;
    return std::abs(x - box.center_x_at(9)) < 0.5 * box.size_x + 0.5 &&
           std::abs(z - box.center_z) < 0.5 * box.size_z + 0.5;
  });
  int freed = 0, ended_occupied = 0, ended_unknown = 0;
  for (const auto& [gi, gj] : transient_cells) {
    const CellState s = map.state(gi, gj);
    freed += s == CellState::kFree;
    ended_occupied += s == CellState::kOccupied;
    ended_unknown += s == CellState::kUnknown;
  }
  if (transient_cells.empty() || freed < static_cast<int>(
                                     transient_cells.size()) - 1)
    out.fail("only " + std::to_string(freed) + "/" +
             std::to_string(transient_cells.size()) +
             " transient cells re-observed free (" +
             std::to_string(ended_occupied) + " occupied, " +
             std::to_string(ended_unknown) + " unknown)");
  else
    out.note(std::to_string(freed) + "/" +
             std::to_string(transient_cells.size()) +
             " transient cells ended free");

  if (elapsed >= 30.0)
    out.fail("pipeline runtime " + fmt(elapsed) + "s >= 30s");
  else
    out.note("pipeline runtime " + fmt(elapsed) + "s");
  return out;
}

// ---------------------------------------------------------------------
// Criterion 8: determinism of criteria 4-7 artifacts across reruns.
// ---------------------------------------------------------------------

std::map<std::string, std::string> collect_artifacts(const fsys::path& dir) {
  std::map<std::string, std::string> bytes;
  for (const auto& entry : fsys::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name =
        fsys::relative(entry.path(), dir).string();
    if (name.find("timings.json") != std::string::npos) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    bytes[name] = std::string((std::istreambuf_iterator<char>(in)), {});
  }
  return bytes;
}

Outcome criterion8(const std::map<std::string, std::string>& a,
                   const std::map<std::string, std::string>& b) {
  Outcome out;
  if (a.size() != b.size())
    out.fail("artifact counts differ: " + std::to_string(a.size()) +
             " vs " + std::to_string(b.size()));
  int differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  if (differing > 0)
    out.fail(std::to_string(differing) + " artifacts differ between reruns");
  else
    out.note(std::to_string(a.size()) + " artifacts bit-identical");
  return out;
}

}  // namespace

int main() {
  const fsys::path root =
      fsys::temp_directory_path() / "freespace_acceptance";
  fsys::remove_all(root);
  const fsys::path run_dir = root / "artifacts";
  fsys::create_directories(run_dir);

  struct Entry {
    int id;
    std::string name;
    Outcome outcome;
  };
  std::vector<Entry> results;
  const auto record = [&](int id, const std::string& name, Outcome o) {
    results.push_back({id, name, std::move(o)});
  };

  try {
    record(1, "sample-grid threshold segmentation", criterion1());
    record(2, "occupancy grid oracle equivalence", criterion2());
    record(3, "gaussian likelihood spot values", criterion3());
    record(4, "ransac plant-and-recover sweep",
           criterion4(run_dir.string()));
    record(5, "stationary-camera segmentation",
           criterion5(run_dir.string()));
    record(6, "rigid transform recovery", criterion6(run_dir.string()));
    record(7, "end-to-end synthetic mapping", criterion7(run_dir,
                                                         "map_run"));

    // Rerun 4-7 with identical seeds and paths; artifacts must reproduce
    // bit for bit.
    const auto snapshot_a = collect_artifacts(run_dir);
    criterion4(run_dir.string());
    criterion5(run_dir.string());
    criterion6(run_dir.string());
    criterion7(run_dir, "map_run");
    record(8, "bit-identical reruns of criteria 4-7",
           criterion8(snapshot_a, collect_artifacts(run_dir)));
  } catch (const std::exception& e) {
    std::cerr << "acceptance suite aborted: " << e.what() << "\n";
    return 99;
  }

  int failures = 0;
  for (const Entry& e : results) {
    const bool pass = e.outcome.pass;
    failures += !pass;
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << e.id
              << ": " << e.name;
    if (!e.outcome.detail.empty()) std::cout << " (" << e.outcome.detail
                                             << ")";
    std::cout << "\n";
  }
  std::cout << (failures == 0
                    ? "acceptance: all criteria passed"
                    : "acceptance: " + std::to_string(failures) +
                          " criterion(s) failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
