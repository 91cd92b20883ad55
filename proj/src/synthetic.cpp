#include "freespace/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "freespace/error.hpp"
#include "freespace/mapping.hpp"
#include "freespace/rng.hpp"

namespace freespace {

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

// splitmix64; stable across platforms.
inline std::uint64_t hash_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double lattice_noise(std::int64_t ix, std::int64_t iy,
                            std::uint64_t seed) {
  const std::uint64_t h = hash_u64(
      seed ^ hash_u64(static_cast<std::uint64_t>(ix) * 0x517cc1b727220a95ull ^
                      static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise in [0, 1].
double value_noise(double x, double y, double scale, std::uint64_t seed) {
  const double fx = x / scale, fy = y / scale;
  const auto ix = static_cast<std::int64_t>(std::floor(fx));
  const auto iy = static_cast<std::int64_t>(std::floor(fy));
  const double tx = fx - ix, ty = fy - iy;
  const double n00 = lattice_noise(ix, iy, seed);
  const double n10 = lattice_noise(ix + 1, iy, seed);
  const double n01 = lattice_noise(ix, iy + 1, seed);
  const double n11 = lattice_noise(ix + 1, iy + 1, seed);
  return (n00 * (1 - tx) + n10 * tx) * (1 - ty) +
         (n01 * (1 - tx) + n11 * tx) * ty;
}

// Octave scales stay well above pixel pitch at working depths; texture at
// the sampling limit decorrelates between frames and starves the matcher.
std::uint8_t texture_at(double a0, double a1, std::uint64_t seed, int id) {
  const std::uint64_t s = seed ^ hash_u64(static_cast<std::uint64_t>(id + 3));
  const double coarse = value_noise(a0, a1, 0.60, s);
  const double mid = value_noise(a0, a1, 0.20, hash_u64(s));
  const double fine = value_noise(a0, a1, 0.09, hash_u64(hash_u64(s)));
  const double v = 40.0 + 120.0 * coarse + 60.0 * mid + 35.0 * fine;
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

struct WorldRay {
  Eigen::Vector3d origin;  // (X, Y, Z) world, Y down
  Eigen::Vector3d dir;     // unit forward component = 1 in camera depth
};

struct CamFrame {
  Eigen::Vector3d pos;
  Eigen::Vector3d right, down, forward;
};

CamFrame cam_frame(const SceneSpec& spec, const EgoPose& pose) {
  CamFrame f;
  f.pos = {pose.x, 0.0, pose.z};
  f.right = {std::cos(pose.yaw), 0.0, -std::sin(pose.yaw)};
  f.down = {0.0, 1.0, 0.0};
  f.forward = {std::sin(pose.yaw), 0.0, std::cos(pose.yaw)};
  (void)spec;
  return f;
}

WorldRay pixel_ray(const SceneSpec& spec, const CamFrame& cam, int px,
                   int py) {
  const double dx = (px - spec.camera.cu) / spec.camera.focal_px;
  const double dy = (py - spec.camera.cv) / spec.camera.focal_px;
  WorldRay r;
  r.origin = cam.pos;
  // Unnormalized so the ray parameter equals camera-frame depth.
  r.dir = dx * cam.right + dy * cam.down + cam.forward;
  return r;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();  // camera depth
  int object = kHitNone;
  Eigen::Vector3d point{0, 0, 0};
  int face_axis = 1;  // 0 = x slab, 1 = y, 2 = z (for texture anchoring)
};

void intersect_ground(const WorldRay& ray, double plane_y, double max_depth,
                      Hit& hit) {
  if (ray.dir.y() <= 0.0) return;
  const double t = (plane_y - ray.origin.y()) / ray.dir.y();
  if (t <= 0.0 || t > max_depth || t >= hit.t) return;
  hit.t = t;
  hit.object = kHitGround;
  hit.point = ray.origin + t * ray.dir;
  hit.face_axis = 1;
}

void intersect_box(const WorldRay& ray, const Eigen::Vector3d& lo,
                   const Eigen::Vector3d& hi, int index, double max_depth,
                   Hit& hit) {
  double t0 = 1e-6, t1 = max_depth;
  int entry_axis = -1;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.dir[a];
    if (d == 0.0) {
      if (o < lo[a] || o > hi[a]) return;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      entry_axis = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (entry_axis < 0) return;  // origin inside the box; ignore
  if (t0 >= hit.t) return;
  hit.t = t0;
  hit.object = index;
  hit.point = ray.origin + t0 * ray.dir;
  hit.face_axis = entry_axis;
}

Eigen::Vector2d project(const SceneSpec& spec, const CamFrame& cam,
                        const Eigen::Vector3d& p, bool& in_front) {
  const Eigen::Vector3d q = p - cam.pos;
  const double z = q.dot(cam.forward);
  in_front = z > 1e-6;
  if (!in_front) return {0, 0};
  const double x = q.dot(cam.right);
  const double y = q.dot(cam.down);
  return {spec.camera.focal_px * x / z + spec.camera.cu,
          spec.camera.focal_px * y / z + spec.camera.cv};
}

}  // namespace

AffineTransform2D camera_to_world(const EgoPose& pose) {
  // Ground-plane coordinates are (x, z); camera x is lateral, z forward.
  Eigen::Matrix2d linear;
  linear << std::cos(pose.yaw), std::sin(pose.yaw),
           -std::sin(pose.yaw), std::cos(pose.yaw);
  return AffineTransform2D(linear, {pose.x, pose.z});
}

SceneFrame generate_scene(const SceneSpec& spec, int frame) {
  if (frame < 0 || frame >= spec.frame_count())
    throw Error("generate_scene: frame index out of range");
  const int w = spec.image_width, h = spec.image_height;
  const CamFrame cam = cam_frame(spec, spec.ego[frame]);
  const bool has_next = frame + 1 < spec.frame_count();
  const CamFrame cam_next =
      has_next ? cam_frame(spec, spec.ego[frame + 1]) : cam;

  SceneFrame out;
  out.disparity = DisparityImage(w, h);
  out.left = ImageU8(w, h, 0);
  out.hit_object = Image<std::int8_t>(w, h, kHitNone);
  const double dNaN = std::numeric_limits<double>::quiet_NaN();
  out.hit_x = Image<double>(w, h, dNaN);
  out.hit_y = Image<double>(w, h, dNaN);
  out.hit_z = Image<double>(w, h, dNaN);
  out.flow_u = Image<float>(w, h, kNaN);
  out.flow_v = Image<float>(w, h, kNaN);
  out.dynamic_mask = Image<std::uint8_t>(w, h, 0);
  out.nearest_box_disparity.assign(w, 0.0f);

  const double plane_y = spec.camera_height_m;

  // Box extents at this frame, plus behind-camera diagnostics.
  std::vector<Eigen::Vector3d> lo(spec.boxes.size()), hi(spec.boxes.size());
  std::vector<bool> skip(spec.boxes.size(), false);
  for (std::size_t b = 0; b < spec.boxes.size(); ++b) {
    const SceneBox& box = spec.boxes[b];
    const double cx = box.center_x_at(frame);
    const double cz = box.center_z_at(frame);
    lo[b] = {cx - 0.5 * box.size_x, plane_y - box.height,
             cz - 0.5 * box.size_z};
    hi[b] = {cx + 0.5 * box.size_x, plane_y, cz + 0.5 * box.size_z};
    double max_forward = -std::numeric_limits<double>::infinity();
    for (const double bx : {lo[b].x(), hi[b].x()})
      for (const double bz : {lo[b].z(), hi[b].z()})
        max_forward = std::max(
            max_forward,
            (Eigen::Vector3d(bx, 0, bz) - cam.pos).dot(cam.forward));
    if (max_forward <= 0.0) {
      skip[b] = true;
      out.diagnostics.push_back("box " + std::to_string(b) +
                                " behind camera, skipped");
    }
  }

  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const WorldRay ray = pixel_ray(spec, cam, px, py);
      Hit hit;
      intersect_ground(ray, plane_y, spec.max_depth_m, hit);
      for (std::size_t b = 0; b < spec.boxes.size(); ++b) {
        if (skip[b]) continue;
        intersect_box(ray, lo[b], hi[b], static_cast<int>(b),
                      spec.max_depth_m, hit);
      }
      if (hit.object == kHitNone) continue;

      const double depth = hit.t;  // camera-frame Z by construction
      out.disparity.set(px, py,
                        static_cast<float>(spec.camera.focal_px *
                                           spec.camera.baseline_m / depth));
      out.hit_object(px, py) = static_cast<std::int8_t>(hit.object);
      out.hit_x(px, py) = hit.point.x();
      out.hit_y(px, py) = hit.point.y();
      out.hit_z(px, py) = hit.point.z();

      // Texture anchored to the surface: ground keyed by world (x, z),
      // box faces by the in-face object coordinates.
      if (hit.object == kHitGround) {
        out.left(px, py) = texture_at(hit.point.x(), hit.point.z(),
                                      spec.texture_seed, 0);
      } else {
        const SceneBox& box = spec.boxes[hit.object];
        const Eigen::Vector3d local(
            hit.point.x() - box.center_x_at(frame), hit.point.y(),
            hit.point.z() - box.center_z_at(frame));
        double a0, a1;
        if (hit.face_axis == 0) {
          a0 = local.z();
          a1 = local.y();
        } else if (hit.face_axis == 2) {
          a0 = local.x();
          a1 = local.y();
        } else {
          a0 = local.x();
          a1 = local.z();
        }
        out.left(px, py) =
            texture_at(a0, a1, spec.texture_seed, 10 + hit.object);
        if (box.dynamic()) out.dynamic_mask(px, py) = 1;
        const float d = out.disparity.at(px, py);
        out.nearest_box_disparity[px] =
            std::max(out.nearest_box_disparity[px], d);
      }

      if (has_next) {
        Eigen::Vector3d next_point = hit.point;
        if (hit.object >= 0 && spec.boxes[hit.object].dynamic()) {
          next_point.x() += spec.boxes[hit.object].velocity_x;
          next_point.z() += spec.boxes[hit.object].velocity_z;
        }
        bool in_front = false;
        const Eigen::Vector2d p1 =
            project(spec, cam_next, next_point, in_front);
        if (in_front) {
          out.flow_u(px, py) = static_cast<float>(p1.x() - px);
          out.flow_v(px, py) = static_cast<float>(p1.y() - py);
        }
      }
    }
  }
  return out;
}

FreeSpaceProfile gt_profile(const SceneFrame& frame, const GridGeometry& g) {
  if (g.mode() != AxisMode::kUDisparity)
    throw Error("gt_profile: expects a u-disparity grid");
  std::vector<std::optional<int>> boundary(g.n_cols());
  const int w = static_cast<int>(frame.nearest_box_disparity.size());
  for (int i = 0; i < g.n_cols(); ++i) {
    // Grid columns coincide with pixel columns for 1px cells; handle other
    // sizes by scanning pixel columns that fall in this grid column.
    std::optional<int> row;
    for (int px = 0; px < w; ++px) {
      const float d = frame.nearest_box_disparity[px];
      if (d <= 0.0f) continue;
      const auto cell = g.cell_at(static_cast<double>(px),
                                  static_cast<double>(d));
      if (!cell || cell->i != i) continue;
      if (!row || cell->j < *row) row = cell->j;
    }
    boundary[i] = row;
  }
  return FreeSpaceProfile(std::move(boundary), g.n_rows());
}

PlantedFlowField planted_flow_field(const PolynomialFlowModel& model,
                                    int n_inliers, int n_outliers,
                                    double noise_sigma, double outlier_offset,
                                    std::uint64_t seed, double u_extent,
                                    double v_extent) {
  if (noise_sigma < 0.0 || outlier_offset < 0.0)
    throw Error("planted_flow_field: noise and offset must be >= 0");
  Rng rng(seed);
  PlantedFlowField out;
  out.samples.reserve(n_inliers + n_outliers);
  out.is_outlier.reserve(n_inliers + n_outliers);
  for (int k = 0; k < n_inliers + n_outliers; ++k) {
    const bool outlier = k >= n_inliers;
    const double u = rng.uniform(-u_extent, u_extent);
    const double v = rng.uniform(-v_extent, v_extent);
    double target = evaluate_model(model, u, v);
    if (noise_sigma > 0.0) target += rng.gaussian(0.0, noise_sigma);
    if (outlier) target += outlier_offset;
    if (target < 0.0)
      throw Error("planted_flow_field: model yields negative magnitude");
    const double theta = rng.uniform(0.0, 6.283185307179586);
    out.samples.emplace_back(u, v, target * std::cos(theta),
                             target * std::sin(theta));
    out.is_outlier.push_back(outlier);
  }
  return out;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open scene spec");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  SceneSpec spec;
  const auto& cam = doc.at("camera");
  spec.camera = CameraIntrinsics(cam.at("focal_px").get<double>(),
                                 cam.at("cu").get<double>(),
                                 cam.at("cv").get<double>(),
                                 cam.at("baseline_m").get<double>());
  spec.image_width = doc.at("image_width").get<int>();
  spec.image_height = doc.at("image_height").get<int>();
  spec.camera_height_m = doc.value("camera_height_m", 1.2);
  spec.max_depth_m = doc.value("max_depth_m", 60.0);
  spec.texture_seed = doc.value("texture_seed", 1ull);
  for (const auto& b : doc.value("boxes", nlohmann::json::array())) {
    SceneBox box;
    box.center_x = b.at("center_x").get<double>();
    box.center_z = b.at("center_z").get<double>();
    box.size_x = b.value("size_x", 1.0);
    box.size_z = b.value("size_z", 1.0);
    box.height = b.value("height", 1.5);
    box.velocity_x = b.value("velocity_x", 0.0);
    box.velocity_z = b.value("velocity_z", 0.0);
    spec.boxes.push_back(box);
  }
  for (const auto& e : doc.at("ego")) {
    EgoPose pose;
    pose.x = e.value("x", 0.0);
    pose.z = e.value("z", 0.0);
    pose.yaw = e.value("yaw", 0.0);
    spec.ego.push_back(pose);
  }
  if (spec.ego.empty()) throw FormatError(path + ": ego trajectory is empty");
  return spec;
}

void save_scene_spec(const std::string& path, const SceneSpec& spec) {
  nlohmann::json doc;
  doc["camera"] = {{"focal_px", spec.camera.focal_px},
                   {"cu", spec.camera.cu},
                   {"cv", spec.camera.cv},
                   {"baseline_m", spec.camera.baseline_m}};
  doc["image_width"] = spec.image_width;
  doc["image_height"] = spec.image_height;
  doc["camera_height_m"] = spec.camera_height_m;
  doc["max_depth_m"] = spec.max_depth_m;
  doc["texture_seed"] = spec.texture_seed;
  doc["boxes"] = nlohmann::json::array();
  for (const SceneBox& b : spec.boxes) {
    doc["boxes"].push_back({{"center_x", b.center_x},
                            {"center_z", b.center_z},
                            {"size_x", b.size_x},
                            {"size_z", b.size_z},
                            {"height", b.height},
                            {"velocity_x", b.velocity_x},
                            {"velocity_z", b.velocity_z}});
  }
  doc["ego"] = nlohmann::json::array();
  for (const EgoPose& e : spec.ego)
    doc["ego"].push_back({{"x", e.x}, {"z", e.z}, {"yaw", e.yaw}});
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
}

}  // namespace freespace
