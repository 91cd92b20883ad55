#include "freespace/geometry.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "freespace/error.hpp"

namespace freespace {

CameraIntrinsics::CameraIntrinsics(double focal, double cu_, double cv_,
                                   double baseline)
    : focal_px(focal), cu(cu_), cv(cv_), baseline_m(baseline) {
  if (!(focal_px > 0.0))
    throw InvalidMeasurement("camera: focal_length_px must be > 0");
  if (!(baseline_m > 0.0))
    throw InvalidMeasurement("camera: baseline_m must be > 0");
}

bool is_symmetric_positive_definite(const Eigen::Matrix3d& m) {
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  return llt.info() == Eigen::Success;
}

Measurement::Measurement(double u_, double v_, double d_,
                         const Eigen::Matrix3d& cov)
    : u(u_), v(v_), d(d_), covariance(cov) {
  if (!(d > 0.0))
    throw InvalidMeasurement("measurement: disparity must be > 0");
  if (!is_symmetric_positive_definite(covariance))
    throw InvalidMeasurement(
        "measurement: covariance must be symmetric positive-definite");
}

Point3 triangulate(const Measurement& m, const CameraIntrinsics& cam) {
  if (!(m.d > 0.0))
    throw InvalidMeasurement("triangulate: non-positive disparity");
  const double z = cam.focal_px * cam.baseline_m / m.d;
  const double x = (m.u - cam.cu) * z / cam.focal_px;
  const double y = (m.v - cam.cv) * z / cam.focal_px;
  return {x, y, z};
}

GridGeometry::GridGeometry(AxisMode mode, int n_cols, int n_rows,
                           double origin0, double origin1, double step0,
                           double step1)
    : mode_(mode), n_cols_(n_cols), n_rows_(n_rows), origin0_(origin0),
      origin1_(origin1), step0_(step0), step1_(step1) {
  if (n_cols_ <= 0 || n_rows_ <= 0)
    throw Error("grid geometry: cell counts must be positive");
  if (step0_ == 0.0 || step1_ == 0.0)
    throw Error("grid geometry: cell sizes must be nonzero");
  // Row index must grow with distance: disparity shrinks with range,
  // metric depth grows with it.
  if (mode_ == AxisMode::kUDisparity && step1_ >= 0.0)
    throw Error("grid geometry: u-disparity rows must descend in disparity");
  if (mode_ == AxisMode::kMetricGround && step1_ <= 0.0)
    throw Error("grid geometry: metric rows must ascend in depth");
}

GridGeometry GridGeometry::u_disparity(int image_width, int max_disparity) {
  return GridGeometry(AxisMode::kUDisparity, image_width, max_disparity,
                      0.0, static_cast<double>(max_disparity), 1.0, -1.0);
}

GridGeometry GridGeometry::metric(double cell_m, double depth_m,
                                  double lateral_m) {
  const int n_cols = static_cast<int>(std::lround(2.0 * lateral_m / cell_m));
  const int n_rows = static_cast<int>(std::lround(depth_m / cell_m));
  return GridGeometry(AxisMode::kMetricGround, n_cols, n_rows,
                      -lateral_m + 0.5 * cell_m, 0.5 * cell_m, cell_m,
                      cell_m);
}

namespace {

// Fractional index such that a point exactly on a shared cell boundary
// resolves to the lower-index cell (works for either step sign).
inline int index_on_axis(double x, double origin, double step) {
  return static_cast<int>(std::ceil((x - origin) / step - 0.5));
}

}  // namespace

std::optional<CellIndex> GridGeometry::cell_at(double a0, double a1) const {
  const CellIndex c{index_on_axis(a0, origin0_, step0_),
                    index_on_axis(a1, origin1_, step1_)};
  if (!contains(c)) return std::nullopt;
  return c;
}

std::optional<CellIndex> cell_of(const Measurement& m, const GridGeometry& g) {
  if (g.mode() != AxisMode::kUDisparity)
    throw Error("cell_of: metric grid requires camera intrinsics");
  return g.cell_at(m.u, m.d);
}

std::optional<CellIndex> cell_of(const Measurement& m, const GridGeometry& g,
                                 const CameraIntrinsics& cam) {
  if (g.mode() == AxisMode::kUDisparity) return g.cell_at(m.u, m.d);
  const Eigen::Vector2d p = ground_point(m, cam);
  return g.cell_at(p.x(), p.y());
}

Eigen::Vector2d ground_point(const Measurement& m,
                             const CameraIntrinsics& cam) {
  const Point3 p = triangulate(m, cam);
  return {p.x, p.z};
}

Eigen::Matrix2d ground_covariance(const Measurement& m,
                                  const CameraIntrinsics& cam) {
  if (!(m.d > 0.0))
    throw InvalidMeasurement("ground_covariance: non-positive disparity");
  const double b = cam.baseline_m;
  const double x = (m.u - cam.cu) * b / m.d;
  const double z = cam.focal_px * b / m.d;
  Eigen::Matrix<double, 2, 3> jac;
  jac << b / m.d, 0.0, -x / m.d,
         0.0,     0.0, -z / m.d;
  return jac * m.covariance * jac.transpose();
}

}  // namespace freespace
