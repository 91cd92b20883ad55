#include "freespace/mapping.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "freespace/error.hpp"
#include "freespace/image_io.hpp"

namespace freespace {

AffineTransform2D AffineTransform2D::rigid(double angle_rad,
                                           const Eigen::Vector2d& t) {
  Eigen::Matrix2d r;
  r << std::cos(angle_rad), -std::sin(angle_rad),
       std::sin(angle_rad),  std::cos(angle_rad);
  return AffineTransform2D(r, t);
}

AffineTransform2D AffineTransform2D::inverse() const {
  const Eigen::Matrix2d inv = linear_.inverse();
  return AffineTransform2D(inv, -(inv * translation_));
}

Eigen::Matrix<double, 2, 3> AffineTransform2D::matrix() const {
  Eigen::Matrix<double, 2, 3> m;
  m.block<2, 2>(0, 0) = linear_;
  m.col(2) = translation_;
  return m;
}

AffineTransform2D AffineTransform2D::from_matrix(
    const Eigen::Matrix<double, 2, 3>& m) {
  return AffineTransform2D(m.block<2, 2>(0, 0), m.col(2));
}

namespace {

void check_geometry(const std::vector<PointPair>& pairs) {
  if (pairs.size() < 3)
    throw EstimationError("estimate_transform: need >= 3 point pairs, got " +
                          std::to_string(pairs.size()));
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const PointPair& p : pairs) mean += p.from;
  mean /= static_cast<double>(pairs.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const PointPair& p : pairs) {
    const Eigen::Vector2d c = p.from - mean;
    scatter += c * c.transpose();
  }
  const double trace = scatter.trace();
  if (!(scatter.determinant() > 1e-10 * trace * trace))
    throw EstimationError("estimate_transform: collinear point geometry");
}

}  // namespace

namespace {

AffineTransform2D fit_transform(const std::vector<PointPair>& pairs,
                                TransformModel model);

// One trimming pass: matched-feature input occasionally carries a gross
// mismatch that least squares cannot absorb.
AffineTransform2D fit_trimmed(const std::vector<PointPair>& pairs,
                              TransformModel model) {
  const AffineTransform2D first = fit_transform(pairs, model);
  double sum_sq = 0.0;
  std::vector<double> residual(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    residual[k] = (first.apply(pairs[k].from) - pairs[k].to).norm();
    sum_sq += residual[k] * residual[k];
  }
  const double rms = std::sqrt(sum_sq / static_cast<double>(pairs.size()));
  const double cutoff = std::max(3.0 * rms, 1e-9);
  std::vector<PointPair> kept;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (residual[k] <= cutoff) kept.push_back(pairs[k]);
  if (kept.size() == pairs.size() || kept.size() < 3) return first;
  try {
    return fit_transform(kept, model);
  } catch (const EstimationError&) {
    return first;
  }
}

AffineTransform2D fit_transform(const std::vector<PointPair>& pairs,
                                TransformModel model) {
  check_geometry(pairs);
  const double n = static_cast<double>(pairs.size());

  if (model == TransformModel::kRigid) {
    Eigen::Vector2d from_mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d to_mean = Eigen::Vector2d::Zero();
    for (const PointPair& p : pairs) {
      from_mean += p.from;
      to_mean += p.to;
    }
    from_mean /= n;
    to_mean /= n;
    double dot = 0.0, cross = 0.0;
    for (const PointPair& p : pairs) {
      const Eigen::Vector2d a = p.from - from_mean;
      const Eigen::Vector2d b = p.to - to_mean;
      dot += a.x() * b.x() + a.y() * b.y();
      cross += a.x() * b.y() - a.y() * b.x();
    }
    const double angle = std::atan2(cross, dot);
    AffineTransform2D t = AffineTransform2D::rigid(angle, {0, 0});
    return AffineTransform2D(t.linear(),
                             to_mean - t.linear() * from_mean);
  }

  // Full affine: two independent 3-parameter least squares problems.
  Eigen::MatrixXd design(pairs.size(), 3);
  Eigen::VectorXd bx(pairs.size()), by(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    design(r, 0) = pairs[r].from.x();
    design(r, 1) = pairs[r].from.y();
    design(r, 2) = 1.0;
    bx(r) = pairs[r].to.x();
    by(r) = pairs[r].to.y();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 3)
    throw EstimationError("estimate_transform: degenerate affine system");
  const Eigen::Vector3d px = qr.solve(bx);
  const Eigen::Vector3d py = qr.solve(by);
  Eigen::Matrix2d linear;
  linear << px(0), px(1), py(0), py(1);
  return AffineTransform2D(linear, {px(2), py(2)});
}

}  // namespace

AffineTransform2D estimate_transform(const std::vector<PointPair>& pairs,
                                     TransformModel model) {
  return fit_trimmed(pairs, model);
}

GroundPairs ground_pairs_from_samples(const std::vector<FlowSample>& samples,
                                      const std::vector<MotionLabel>& labels,
                                      const DisparityImage& disp_i,
                                      const DisparityImage& disp_i1,
                                      const CameraIntrinsics& cam) {
  GroundPairs out;
  const Eigen::Matrix3d unit = Eigen::Matrix3d::Identity();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (labels[k] != MotionLabel::kBackground) continue;
    const FlowSample& s = samples[k];
    const int x0 = static_cast<int>(std::lround(s.x_px));
    const int y0 = static_cast<int>(std::lround(s.y_px));
    const int x1 = static_cast<int>(std::lround(s.x_px + s.f_u));
    const int y1 = static_cast<int>(std::lround(s.y_px + s.f_v));
    if (!disp_i.values().in_bounds(x0, y0) ||
        !disp_i1.values().in_bounds(x1, y1) || !disp_i.valid(x0, y0) ||
        !disp_i1.valid(x1, y1)) {
      ++out.skipped_invalid_disparity;
      continue;
    }
    const double d0 = disp_i.at(x0, y0);
    const double d1 = disp_i1.at(x1, y1);
    if (!(d0 > 0.0) || !(d1 > 0.0)) {
      ++out.skipped_invalid_disparity;
      continue;
    }
    const Measurement m0(s.x_px, s.y_px, d0, unit);
    const Measurement m1(s.x_px + s.f_u, s.y_px + s.f_v, d1, unit);
    out.pairs.push_back({ground_point(m0, cam), ground_point(m1, cam)});
  }
  return out;
}

Image<std::uint32_t> count_measurement_hits(const MeasurementSet& ms,
                                            const GridGeometry& g,
                                            const CameraIntrinsics& cam) {
  Image<std::uint32_t> hits(g.n_cols(), g.n_rows(), 0);
  for (const Measurement& m : ms.measurements) {
    const auto cell = cell_of(m, g, cam);
    if (cell) ++hits(cell->i, cell->j);
  }
  return hits;
}

MeasurementSet filter_above_ground(const MeasurementSet& ms,
                                   const CameraIntrinsics& cam,
                                   double camera_height_m,
                                   double min_height_m) {
  MeasurementSet out;
  out.skipped_zero_disparity = ms.skipped_zero_disparity;
  for (const Measurement& m : ms.measurements) {
    const Point3 p = triangulate(m, cam);
    const double height_above_ground = camera_height_m - p.y;
    if (height_above_ground >= min_height_m) out.measurements.push_back(m);
  }
  return out;
}

GlobalMap::GlobalMap(double cell_m, double occupancy_threshold)
    : cell_m_(cell_m), threshold_(occupancy_threshold) {
  if (!(cell_m_ > 0.0)) throw Error("global map: cell size must be > 0");
}

namespace {

inline int floor_div(int a, int b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Shared boundary belongs to the lower-index cell, matching GridGeometry.
inline int axis_cell(double x, double cell) {
  return static_cast<int>(std::ceil(x / cell - 0.5));
}

}  // namespace

Eigen::Vector2i GlobalMap::cell_index(const Eigen::Vector2d& p) const {
  return {axis_cell(p.x(), cell_m_), axis_cell(p.y(), cell_m_)};
}

MapCell& GlobalMap::cell_mut(int gi, int gj) {
  const std::pair<int, int> tkey{floor_div(gi, kTileSize),
                                 floor_div(gj, kTileSize)};
  Tile& tile = tiles_[tkey];
  const int li = gi - tkey.first * kTileSize;
  const int lj = gj - tkey.second * kTileSize;
  return tile.cells[static_cast<std::size_t>(lj) * kTileSize + li];
}

const MapCell* GlobalMap::cell(int gi, int gj) const {
  const std::pair<int, int> tkey{floor_div(gi, kTileSize),
                                 floor_div(gj, kTileSize)};
  const auto it = tiles_.find(tkey);
  if (it == tiles_.end()) return nullptr;
  const int li = gi - tkey.first * kTileSize;
  const int lj = gj - tkey.second * kTileSize;
  return &it->second.cells[static_cast<std::size_t>(lj) * kTileSize + li];
}

void GlobalMap::fuse(const OccupancyGrid& local,
                     const Image<std::uint32_t>& hits,
                     const AffineTransform2D& pose) {
  const GridGeometry& g = local.geometry();
  if (g.mode() != AxisMode::kMetricGround)
    throw Error("global map: fuse requires a metric-mode grid");
  if (hits.width() != g.n_cols() || hits.height() != g.n_rows())
    throw Error("global map: hit-count image does not match grid");

  for (int j = 0; j < g.n_rows(); ++j) {
    for (int i = 0; i < g.n_cols(); ++i) {
      const Eigen::Vector2d p =
          pose.apply({g.center0(i), g.center1(j)});
      const Eigen::Vector2i c = cell_index(p);
      MapCell& cell = cell_mut(c.x(), c.y());
      const std::uint32_t h = hits(i, j);
      cell.accum += local.at(i, j);
      cell.count += 1;
      cell.hits += h;
      if (h > 0 && cell.force_unknown) cell.force_unknown = false;
    }
  }
  trajectory_.push_back(pose);
}

DynamicMarkStats GlobalMap::mark_dynamic_cells(
    const std::vector<Eigen::Vector2d>& dynamic_px,
    const DisparityImage& disp, const CameraIntrinsics& cam,
    const AffineTransform2D& pose) {
  DynamicMarkStats stats;
  const Eigen::Matrix3d unit = Eigen::Matrix3d::Identity();
  for (const Eigen::Vector2d& px : dynamic_px) {
    const int x = static_cast<int>(std::lround(px.x()));
    const int y = static_cast<int>(std::lround(px.y()));
    if (!disp.values().in_bounds(x, y) || !disp.valid(x, y) ||
        !(disp.at(x, y) > 0.0)) {
      ++stats.skipped_invalid_disparity;
      continue;
    }
    const Measurement m(px.x(), px.y(), disp.at(x, y), unit);
    const Eigen::Vector2d p = pose.apply(ground_point(m, cam));
    const Eigen::Vector2i c = cell_index(p);
    MapCell& cell = cell_mut(c.x(), c.y());
    // The moving object owned this cell: its evidence (and anything it
    // occluded) cannot be trusted, so the state is re-earned from later
    // observations.
    if (!cell.force_unknown) ++stats.marked_cells;
    cell = MapCell{};
    cell.force_unknown = true;
  }
  return stats;
}

CellState GlobalMap::state(int gi, int gj) const {
  const MapCell* c = cell(gi, gj);
  if (!c || c->force_unknown || c->count == 0) return CellState::kUnknown;
  return c->accum >= threshold_ * static_cast<double>(c->count)
             ? CellState::kOccupied
             : CellState::kFree;
}

GlobalMap::Bounds GlobalMap::bounds() const {
  Bounds b;
  if (tiles_.empty()) return b;
  b.gi0 = b.gj0 = std::numeric_limits<int>::max();
  b.gi1 = b.gj1 = std::numeric_limits<int>::min();
  for (const auto& [key, tile] : tiles_) {
    b.gi0 = std::min(b.gi0, key.first * kTileSize);
    b.gi1 = std::max(b.gi1, key.first * kTileSize + kTileSize - 1);
    b.gj0 = std::min(b.gj0, key.second * kTileSize);
    b.gj1 = std::max(b.gj1, key.second * kTileSize + kTileSize - 1);
  }
  return b;
}

void export_map(const std::string& pgm_path, const GlobalMap& map) {
  const GlobalMap::Bounds b = map.bounds();
  if (b.empty()) {
    write_gray8(pgm_path, ImageU8(1, 1, 128));
    return;
  }
  ImageU8 img(b.gi1 - b.gi0 + 1, b.gj1 - b.gj0 + 1, 128);
  for (int gj = b.gj0; gj <= b.gj1; ++gj) {
    for (int gi = b.gi0; gi <= b.gi1; ++gi) {
      const CellState s = map.state(gi, gj);
      const std::uint8_t v =
          s == CellState::kFree ? 255 : (s == CellState::kOccupied ? 0 : 128);
      img(gi - b.gi0, b.gj1 - gj) = v;  // depth grows upward
    }
  }
  write_gray8(pgm_path, img);
}

void export_trajectory(const std::string& json_path, const GlobalMap& map) {
  nlohmann::json doc = nlohmann::json::array();
  for (const AffineTransform2D& t : map.trajectory()) {
    const auto m = t.matrix();
    doc.push_back({{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}});
  }
  std::ofstream out(json_path);
  if (!out) throw FormatError(json_path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
}

std::vector<AffineTransform2D> load_odometry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open odometry file");
  std::vector<AffineTransform2D> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    double vals[6];
    char comma;
    for (int k = 0; k < 6; ++k) {
      if (!(ss >> vals[k]))
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected 6 comma-separated values");
      if (k < 5) ss >> comma;
    }
    Eigen::Matrix<double, 2, 3> m;
    m << vals[0], vals[1], vals[2], vals[3], vals[4], vals[5];
    out.push_back(AffineTransform2D::from_matrix(m));
  }
  return out;
}

}  // namespace freespace
