#include "freespace/config.hpp"

#include <fstream>
#include <set>

#include "freespace/error.hpp"

namespace freespace {

GridGeometry PipelineConfig::u_disparity_geometry(int image_width) const {
  const int cols = grid_cols > 0 ? grid_cols : image_width;
  return GridGeometry::u_disparity(cols, max_disparity);
}

GridGeometry PipelineConfig::metric_geometry() const {
  return GridGeometry::metric(metric_cell_m, metric_depth_m,
                              metric_lateral_m);
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj,
                         const std::set<std::string>& known,
                         const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key))
      throw ConfigError("config: unknown key '" +
                        (scope.empty() ? key : scope + "." + key) + "'");
  }
}

template <typename T>
void get_if(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& doc) {
  PipelineConfig cfg;
  reject_unknown_keys(
      doc,
      {"threads", "simd", "camera", "grid", "covariance", "stride",
       "likelihood", "segmentation", "block_match", "features", "ransac",
       "transform", "map", "output_dir", "frames"},
      "");

  get_if(doc, "threads", cfg.threads);
  get_if(doc, "simd", cfg.simd);
  if (cfg.simd != "auto" && cfg.simd != "scalar" && cfg.simd != "avx2")
    throw ConfigError("config: simd must be auto, scalar or avx2");

  if (doc.contains("camera")) {
    const auto& c = doc.at("camera");
    reject_unknown_keys(c, {"focal_px", "cu", "cv", "baseline_m"}, "camera");
    double focal = cfg.camera.focal_px, cu = cfg.camera.cu,
           cv = cfg.camera.cv, baseline = cfg.camera.baseline_m;
    get_if(c, "focal_px", focal);
    get_if(c, "cu", cu);
    get_if(c, "cv", cv);
    get_if(c, "baseline_m", baseline);
    cfg.camera = CameraIntrinsics(focal, cu, cv, baseline);
  }

  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    reject_unknown_keys(g,
                        {"cols", "max_disparity", "metric_cell_m",
                         "metric_depth_m", "metric_lateral_m"},
                        "grid");
    get_if(g, "cols", cfg.grid_cols);
    get_if(g, "max_disparity", cfg.max_disparity);
    get_if(g, "metric_cell_m", cfg.metric_cell_m);
    get_if(g, "metric_depth_m", cfg.metric_depth_m);
    get_if(g, "metric_lateral_m", cfg.metric_lateral_m);
  }

  if (doc.contains("covariance")) {
    const auto& c = doc.at("covariance");
    reject_unknown_keys(c, {"sigma_u", "sigma_v", "sigma_d", "sigma_d_slope"},
                        "covariance");
    get_if(c, "sigma_u", cfg.covariance.sigma_u);
    get_if(c, "sigma_v", cfg.covariance.sigma_v);
    get_if(c, "sigma_d", cfg.covariance.sigma_d);
    get_if(c, "sigma_d_slope", cfg.covariance.sigma_d_slope);
  }

  if (doc.contains("stride")) {
    const auto& s = doc.at("stride");
    reject_unknown_keys(s, {"u", "v"}, "stride");
    get_if(s, "u", cfg.stride_u);
    get_if(s, "v", cfg.stride_v);
  }

  if (doc.contains("likelihood")) {
    const auto& l = doc.at("likelihood");
    reject_unknown_keys(l, {"normalization", "truncation_sigma"},
                        "likelihood");
    if (l.contains("normalization"))
      cfg.normalization =
          normalization_from_string(l.at("normalization").get<std::string>());
    get_if(l, "truncation_sigma", cfg.truncation_sigma);
  }

  if (doc.contains("segmentation")) {
    const auto& s = doc.at("segmentation");
    reject_unknown_keys(
        s, {"method", "threshold", "transition_ordinal", "median_filter",
            "median_radius"},
        "segmentation");
    if (s.contains("method")) {
      const std::string m = s.at("method").get<std::string>();
      if (m == "threshold") {
        cfg.segmentation = SegmentationMethod::kThreshold;
      } else if (m == "transition") {
        cfg.segmentation = SegmentationMethod::kTransition;
      } else {
        throw ConfigError("config: segmentation.method must be threshold or "
                          "transition");
      }
    }
    get_if(s, "threshold", cfg.threshold);
    get_if(s, "transition_ordinal", cfg.transition_ordinal);
    get_if(s, "median_filter", cfg.median_filter);
    get_if(s, "median_radius", cfg.median_radius);
  }

  if (doc.contains("block_match")) {
    const auto& b = doc.at("block_match");
    reject_unknown_keys(
        b, {"window_radius", "max_disparity", "uniqueness_ratio"},
        "block_match");
    get_if(b, "window_radius", cfg.block_match.window_radius);
    get_if(b, "max_disparity", cfg.block_match.max_disparity);
    get_if(b, "uniqueness_ratio", cfg.block_match.uniqueness_ratio);
  }

  if (doc.contains("features")) {
    const auto& f = doc.at("features");
    reject_unknown_keys(
        f,
        {"harris_k", "smoothing_radius", "quality_level", "nms_radius",
         "max_corners", "patch_radius", "search_radius_u", "search_radius_v",
         "min_ncc", "fb_tolerance_px", "subpixel"},
        "features");
    get_if(f, "harris_k", cfg.features.harris.k);
    get_if(f, "smoothing_radius", cfg.features.harris.smoothing_radius);
    get_if(f, "quality_level", cfg.features.harris.quality_level);
    get_if(f, "nms_radius", cfg.features.harris.nms_radius);
    get_if(f, "max_corners", cfg.features.harris.max_corners);
    get_if(f, "patch_radius", cfg.features.patch_radius);
    get_if(f, "search_radius_u", cfg.features.search_radius_u);
    get_if(f, "search_radius_v", cfg.features.search_radius_v);
    get_if(f, "min_ncc", cfg.features.min_ncc);
    get_if(f, "fb_tolerance_px", cfg.features.fb_tolerance_px);
    get_if(f, "subpixel", cfg.features.subpixel);
  }

  if (doc.contains("ransac")) {
    const auto& r = doc.at("ransac");
    reject_unknown_keys(
        r, {"degree", "sample_fraction", "iterations", "inlier_epsilon",
            "seed"},
        "ransac");
    get_if(r, "degree", cfg.ransac_degree);
    get_if(r, "sample_fraction", cfg.ransac.sample_fraction);
    get_if(r, "iterations", cfg.ransac.iterations);
    get_if(r, "inlier_epsilon", cfg.ransac.inlier_epsilon);
    get_if(r, "seed", cfg.ransac.seed);
  }

  if (doc.contains("transform")) {
    const auto& t = doc.at("transform");
    reject_unknown_keys(t, {"source", "model", "odometry_csv"}, "transform");
    if (t.contains("source")) {
      const std::string s = t.at("source").get<std::string>();
      if (s == "features") {
        cfg.transform_source = TransformSource::kFeatures;
      } else if (s == "odometry") {
        cfg.transform_source = TransformSource::kOdometry;
      } else {
        throw ConfigError(
            "config: transform.source must be features or odometry");
      }
    }
    if (t.contains("model")) {
      const std::string m = t.at("model").get<std::string>();
      if (m == "rigid") {
        cfg.transform_model = TransformModel::kRigid;
      } else if (m == "affine") {
        cfg.transform_model = TransformModel::kAffine;
      } else {
        throw ConfigError("config: transform.model must be rigid or affine");
      }
    }
    get_if(t, "odometry_csv", cfg.odometry_csv);
  }

  if (doc.contains("map")) {
    const auto& m = doc.at("map");
    reject_unknown_keys(
        m, {"threshold", "camera_height_m", "min_obstacle_height_m"}, "map");
    get_if(m, "threshold", cfg.map_threshold);
    get_if(m, "camera_height_m", cfg.camera_height_m);
    get_if(m, "min_obstacle_height_m", cfg.min_obstacle_height_m);
  }

  get_if(doc, "output_dir", cfg.output_dir);

  if (doc.contains("frames")) {
    for (const auto& f : doc.at("frames")) {
      reject_unknown_keys(f, {"left", "right", "disparity"}, "frames[]");
      FrameInput frame;
      get_if(f, "left", frame.left);
      get_if(f, "right", frame.right);
      get_if(f, "disparity", frame.disparity);
      cfg.frames.push_back(frame);
    }
  }
  return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json doc;
  doc["threads"] = cfg.threads;
  doc["simd"] = cfg.simd;
  doc["camera"] = {{"focal_px", cfg.camera.focal_px},
                   {"cu", cfg.camera.cu},
                   {"cv", cfg.camera.cv},
                   {"baseline_m", cfg.camera.baseline_m}};
  doc["grid"] = {{"cols", cfg.grid_cols},
                 {"max_disparity", cfg.max_disparity},
                 {"metric_cell_m", cfg.metric_cell_m},
                 {"metric_depth_m", cfg.metric_depth_m},
                 {"metric_lateral_m", cfg.metric_lateral_m}};
  doc["covariance"] = {{"sigma_u", cfg.covariance.sigma_u},
                       {"sigma_v", cfg.covariance.sigma_v},
                       {"sigma_d", cfg.covariance.sigma_d},
                       {"sigma_d_slope", cfg.covariance.sigma_d_slope}};
  doc["stride"] = {{"u", cfg.stride_u}, {"v", cfg.stride_v}};
  doc["likelihood"] = {{"normalization", to_string(cfg.normalization)},
                       {"truncation_sigma", cfg.truncation_sigma}};
  doc["segmentation"] = {
      {"method", cfg.segmentation == SegmentationMethod::kThreshold
                     ? "threshold"
                     : "transition"},
      {"threshold", cfg.threshold},
      {"transition_ordinal", cfg.transition_ordinal},
      {"median_filter", cfg.median_filter},
      {"median_radius", cfg.median_radius}};
  doc["block_match"] = {
      {"window_radius", cfg.block_match.window_radius},
      {"max_disparity", cfg.block_match.max_disparity},
      {"uniqueness_ratio", cfg.block_match.uniqueness_ratio}};
  doc["features"] = {{"harris_k", cfg.features.harris.k},
                     {"smoothing_radius", cfg.features.harris.smoothing_radius},
                     {"quality_level", cfg.features.harris.quality_level},
                     {"nms_radius", cfg.features.harris.nms_radius},
                     {"max_corners", cfg.features.harris.max_corners},
                     {"patch_radius", cfg.features.patch_radius},
                     {"search_radius_u", cfg.features.search_radius_u},
                     {"search_radius_v", cfg.features.search_radius_v},
                     {"min_ncc", cfg.features.min_ncc},
                     {"fb_tolerance_px", cfg.features.fb_tolerance_px},
                     {"subpixel", cfg.features.subpixel}};
  doc["ransac"] = {{"degree", cfg.ransac_degree},
                   {"sample_fraction", cfg.ransac.sample_fraction},
                   {"iterations", cfg.ransac.iterations},
                   {"inlier_epsilon", cfg.ransac.inlier_epsilon},
                   {"seed", cfg.ransac.seed}};
  doc["transform"] = {
      {"source", cfg.transform_source == TransformSource::kFeatures
                     ? "features"
                     : "odometry"},
      {"model",
       cfg.transform_model == TransformModel::kRigid ? "rigid" : "affine"},
      {"odometry_csv", cfg.odometry_csv}};
  doc["map"] = {{"threshold", cfg.map_threshold},
                {"camera_height_m", cfg.camera_height_m},
                {"min_obstacle_height_m", cfg.min_obstacle_height_m}};
  doc["output_dir"] = cfg.output_dir;
  doc["frames"] = nlohmann::json::array();
  for (const FrameInput& f : cfg.frames) {
    doc["frames"].push_back({{"left", f.left},
                             {"right", f.right},
                             {"disparity", f.disparity}});
  }
  return doc;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace freespace
