#include "freespace/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "freespace/error.hpp"
#include "freespace/features.hpp"
#include "freespace/image_io.hpp"
#include "freespace/kernels.hpp"
#include "freespace/mapping.hpp"
#include "freespace/segmentation.hpp"

namespace freespace {

namespace {

namespace fsys = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string frame_tag(int f) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", f);
  return buf;
}

class StageTimer {
 public:
  void add(const std::string& stage, double seconds) {
    totals_[stage] += seconds;
  }
  nlohmann::json json() const {
    nlohmann::json doc;
    for (const auto& [stage, s] : totals_) doc[stage] = s;
    return doc;
  }

 private:
  std::map<std::string, double> totals_;
};

// Runs one stage, tagging any failure with frame index and stage name.
template <typename Fn>
auto run_stage(StageTimer& timer, int frame, const std::string& stage,
               Fn&& fn) {
  const auto start = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timer.add(stage, std::chrono::duration<double>(Clock::now() - start)
                           .count());
    } else {
      auto result = fn();
      timer.add(stage, std::chrono::duration<double>(Clock::now() - start)
                           .count());
      return result;
    }
  } catch (const std::exception& e) {
    throw Error("frame " + std::to_string(frame) + ", stage '" + stage +
                "': " + e.what());
  }
}

void export_detections(const std::string& json_path,
                       const std::string& csv_path,
                       const std::vector<FlowSample>& samples,
                       const RansacResult& result,
                       const std::vector<MotionLabel>& labels,
                       int degree, const RansacConfig& cfg) {
  nlohmann::json doc;
  doc["degree"] = degree;
  doc["coefficients"] = result.model.coefficients;
  doc["seed"] = cfg.seed;
  doc["inlier_epsilon"] = cfg.inlier_epsilon;
  doc["subset_size"] = result.subset_size;
  doc["best_iteration"] = result.best_iteration;
  auto& arr = doc["keypoints"] = nlohmann::json::array();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const FlowSample& s = samples[k];
    arr.push_back(
        {{"u", s.u},
         {"v", s.v},
         {"x_px", s.x_px},
         {"y_px", s.y_px},
         {"f_u", s.f_u},
         {"f_v", s.f_v},
         {"psi", s.psi},
         {"residual", result.residuals[k]},
         {"label",
          labels[k] == MotionLabel::kDynamic ? "dynamic" : "background"}});
  }
  std::ofstream out(json_path);
  if (!out) throw FormatError(json_path + ": cannot open for writing");
  out << doc.dump(2) << "\n";

  std::ofstream csv(csv_path);
  if (!csv) throw FormatError(csv_path + ": cannot open for writing");
  csv << "index,residual\n";
  csv.precision(17);
  for (std::size_t k = 0; k < result.residuals.size(); ++k)
    csv << k << "," << result.residuals[k] << "\n";
}

struct FrameData {
  ImageU8 left;
  DisparityImage disparity;
  MeasurementSet measurements;
  OccupancyGrid metric_grid;
  Image<std::uint32_t> metric_hits;
};

}  // namespace

nlohmann::json run_pipeline(const PipelineConfig& cfg,
                            const PipelineOptions& opt) {
  kernels::select(cfg.simd);
  if (cfg.frames.empty()) throw Error("pipeline: no input frames");
  fsys::create_directories(cfg.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (fsys::path(cfg.output_dir) / name).string();
  };

  std::vector<AffineTransform2D> odometry;
  if (cfg.transform_source == TransformSource::kOdometry) {
    odometry = load_odometry_csv(cfg.odometry_csv);
    if (odometry.size() < cfg.frames.size())
      throw Error("pipeline: odometry file has " +
                  std::to_string(odometry.size()) + " poses for " +
                  std::to_string(cfg.frames.size()) + " frames");
  }

  StageTimer timer;
  nlohmann::json report;
  report["simd"] = kernels::active().name;
  report["seed"] = cfg.ransac.seed;
  report["config"] = config_to_json(cfg);
  auto& frames_json = report["frames"] = nlohmann::json::array();
  auto& pairs_json = report["pairs"] = nlohmann::json::array();

  const bool build_map = opt.emit_map && cfg.frames.size() >= 2;
  const GridGeometry metric_geom = cfg.metric_geometry();
  GlobalMap map(cfg.metric_cell_m, cfg.map_threshold);
  AffineTransform2D global_pose;  // frame-0 frame is the global frame
  AffineTransform2D prev_global_pose;

  FrameData prev;
  for (int f = 0; f < static_cast<int>(cfg.frames.size()); ++f) {
    const FrameInput& input = cfg.frames[f];
    FrameData cur;
    nlohmann::json frame_report;
    frame_report["index"] = f;

    cur.left = run_stage(timer, f, "load", [&] {
      if (input.left.empty())
        throw Error("frame input has no left image path");
      return read_gray8(input.left);
    });

    cur.disparity = run_stage(timer, f, "disparity", [&] {
      if (!input.disparity.empty()) return load_disparity(input.disparity);
      if (input.right.empty())
        throw Error("frame needs a disparity file or a right image");
      BlockMatchParams bm = cfg.block_match;
      bm.threads = cfg.threads;
      return block_match(cur.left, read_gray8(input.right), bm);
    });

    cur.measurements = run_stage(timer, f, "measurements", [&] {
      return measurements_from_disparity(cur.disparity, cfg.stride_u,
                                         cfg.stride_v, cfg.covariance);
    });
    frame_report["measurements"] = cur.measurements.count();
    frame_report["skipped_zero_disparity"] =
        cur.measurements.skipped_zero_disparity;

    GridBuildOptions build_opt;
    build_opt.normalization = cfg.normalization;
    build_opt.truncation_sigma = cfg.truncation_sigma;
    build_opt.threads = cfg.threads;

    const OccupancyGrid ud_grid = run_stage(timer, f, "grid", [&] {
      OccupancyGrid grid = build_grid(
          cur.measurements, cfg.u_disparity_geometry(cur.disparity.width()),
          build_opt);
      grid.set_frame_id(f);
      return grid;
    });
    if (opt.emit_per_frame) {
      export_grid(out_path("frame_" + frame_tag(f) + "_grid.pgm"),
                  out_path("frame_" + frame_tag(f) + "_grid.json"), ud_grid);
    }

    run_stage(timer, f, "segment", [&] {
      FreeSpaceProfile profile =
          cfg.segmentation == SegmentationMethod::kThreshold
              ? threshold_segment(ud_grid, cfg.threshold)
              : transition_segment(ud_grid, cfg.threshold,
                                   cfg.transition_ordinal);
      if (cfg.median_filter)
        profile = median_filter_profile(profile, cfg.median_radius);
      if (opt.emit_per_frame) {
        export_profile(out_path("frame_" + frame_tag(f) + "_profile.json"),
                       profile);
        export_profile_overlay(
            out_path("frame_" + frame_tag(f) + "_overlay.pgm"), profile);
      }
    });

    if (build_map) {
      run_stage(timer, f, "metric-grid", [&] {
        // Obstacle evidence from above-ground points only; every
        // measurement still counts as a hit for re-observation.
        const MeasurementSet obstacles =
            filter_above_ground(cur.measurements, cfg.camera,
                                cfg.camera_height_m,
                                cfg.min_obstacle_height_m);
        cur.metric_grid =
            build_grid(obstacles, metric_geom, cfg.camera, build_opt);
        cur.metric_grid.set_frame_id(f);
        cur.metric_hits =
            count_measurement_hits(cur.measurements, metric_geom, cfg.camera);
      });
    }

    if (f == 0) {
      if (build_map) {
        global_pose = cfg.transform_source == TransformSource::kOdometry
                          ? odometry[0]
                          : AffineTransform2D::identity();
        run_stage(timer, f, "fuse", [&] {
          map.fuse(cur.metric_grid, cur.metric_hits, global_pose);
        });
      }
      prev = std::move(cur);
      prev_global_pose = global_pose;
      frames_json.push_back(frame_report);
      continue;
    }

    // Pair (f-1, f): detect motion, estimate the inter-frame transform,
    // then fuse frame f and neutralize dynamic cells at both endpoints.
    nlohmann::json pair_report;
    pair_report["frames"] = {f - 1, f};

    const std::vector<FlowSample> samples =
        run_stage(timer, f, "features", [&] {
          MatchParams mp = cfg.features;
          mp.threads = cfg.threads;
          return detect_and_match(prev.left, cur.left, mp);
        });
    pair_report["matches"] = samples.size();

    RansacResult ransac;
    std::vector<MotionLabel> labels;
    run_stage(timer, f, "ransac", [&] {
      RansacConfig rc = cfg.ransac;
      rc.seed = cfg.ransac.seed + static_cast<std::uint64_t>(f - 1);
      ransac = fit_flow_model_ransac(samples, cfg.ransac_degree, rc);
      labels = classify_dynamic(samples, ransac.model, rc.inlier_epsilon);
      if (opt.emit_pairs) {
        export_detections(
            out_path("pair_" + frame_tag(f - 1) + "_detections.json"),
            out_path("pair_" + frame_tag(f - 1) + "_residuals.csv"), samples,
            ransac, labels, cfg.ransac_degree, rc);
      }
    });
    int dynamic_count = 0;
    for (const MotionLabel l : labels)
      if (l == MotionLabel::kDynamic) ++dynamic_count;
    pair_report["dynamic_keypoints"] = dynamic_count;
    pair_report["inliers"] = static_cast<int>(samples.size()) - dynamic_count;

    if (build_map) {
      if (cfg.transform_source == TransformSource::kOdometry) {
        global_pose = odometry[f];
      } else {
        const AffineTransform2D inter =
            run_stage(timer, f, "transform", [&] {
              GroundPairs pairs = ground_pairs_from_samples(
                  samples, labels, prev.disparity, cur.disparity, cfg.camera);
              pair_report["transform_pairs"] = pairs.pairs.size();
              pair_report["transform_skipped_invalid_disparity"] =
                  pairs.skipped_invalid_disparity;
              AffineTransform2D t =
                  estimate_transform(pairs.pairs, cfg.transform_model);
              t.source_frame = f - 1;
              t.target_frame = f;
              return t;
            });
        pair_report["rotation_rad"] = inter.rotation_angle();
        pair_report["translation_m"] = {inter.translation().x(),
                                        inter.translation().y()};
        global_pose = global_pose * inter.inverse();
      }

      run_stage(timer, f, "dynamic-cells", [&] {
        std::vector<Eigen::Vector2d> prev_px, cur_px;
        for (std::size_t k = 0; k < samples.size(); ++k) {
          if (labels[k] != MotionLabel::kDynamic) continue;
          prev_px.push_back({samples[k].x_px, samples[k].y_px});
          cur_px.push_back({samples[k].x_px + samples[k].f_u,
                            samples[k].y_px + samples[k].f_v});
        }
        // Frame f-1 endpoints first: its fuse journal is still pending.
        const DynamicMarkStats prev_stats = map.mark_dynamic_cells(
            prev_px, prev.disparity, cfg.camera, prev_global_pose);
        map.fuse(cur.metric_grid, cur.metric_hits, global_pose);
        const DynamicMarkStats cur_stats = map.mark_dynamic_cells(
            cur_px, cur.disparity, cfg.camera, global_pose);
        pair_report["marked_cells"] =
            prev_stats.marked_cells + cur_stats.marked_cells;
        pair_report["skipped_invalid_disparity"] =
            prev_stats.skipped_invalid_disparity +
            cur_stats.skipped_invalid_disparity;
      });
    }

    pairs_json.push_back(pair_report);
    frames_json.push_back(frame_report);
    prev = std::move(cur);
    prev_global_pose = global_pose;
  }

  if (build_map) {
    export_map(out_path("map.pgm"), map);
    export_trajectory(out_path("trajectory.json"), map);
    const GlobalMap::Bounds b = map.bounds();
    report["map"] = {{"cell_m", map.cell_size()},
                     {"bounds", {b.gi0, b.gj0, b.gi1, b.gj1}}};
  }

  {
    std::ofstream out(out_path("run_report.json"));
    if (!out) throw FormatError("run_report.json: cannot open for writing");
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(out_path("timings.json"));
    if (!out) throw FormatError("timings.json: cannot open for writing");
    out << timer.json().dump(2) << "\n";
  }
  return report;
}

}  // namespace freespace
