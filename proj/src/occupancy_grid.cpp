#include "freespace/occupancy_grid.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <thread>

#include "freespace/error.hpp"
#include "freespace/image_io.hpp"
#include "freespace/kernels.hpp"

namespace freespace {

namespace {

const double kNorm3 = std::pow(2.0 * 3.14159265358979323846, -1.5);

Eigen::Matrix3d embed_ground_cov(const Eigen::Matrix2d& cov2) {
  Eigen::Matrix3d cov3 = Eigen::Matrix3d::Identity();
  cov3(0, 0) = cov2(0, 0);
  cov3(0, 2) = cov2(0, 1);
  cov3(2, 0) = cov2(1, 0);
  cov3(2, 2) = cov2(1, 1);
  return cov3;
}

}  // namespace

NormalizationMode normalization_from_string(const std::string& s) {
  if (s == "standard") return NormalizationMode::kStandard;
  if (s == "paper-literal") return NormalizationMode::kPaperLiteral;
  throw ConfigError("unknown normalization mode '" + s + "'");
}

std::string to_string(NormalizationMode mode) {
  return mode == NormalizationMode::kStandard ? "standard" : "paper-literal";
}

double gaussian_likelihood(const Eigen::Vector3d& delta,
                           const Eigen::Matrix3d& tau,
                           NormalizationMode mode) {
  if (!tau.isApprox(tau.transpose(), 1e-10))
    throw InvalidMeasurement("gaussian_likelihood: tau not symmetric");
  Eigen::LLT<Eigen::Matrix3d> llt(tau);
  if (llt.info() != Eigen::Success)
    throw InvalidMeasurement("gaussian_likelihood: tau not positive-definite");
  const Eigen::Matrix3d& l = llt.matrixLLT();
  const double sqrt_det = l(0, 0) * l(1, 1) * l(2, 2);
  const double q = delta.dot(llt.solve(delta));
  const double standard = kNorm3 * std::exp(-0.5 * q) / sqrt_det;
  if (mode == NormalizationMode::kStandard) return standard;
  return standard / sqrt_det;
}

double cell_likelihood(CellIndex cell, const Measurement& m,
                       const GridGeometry& g, NormalizationMode mode) {
  if (g.mode() != AxisMode::kUDisparity)
    throw Error("cell_likelihood: metric grid requires camera intrinsics");
  if (!g.contains(cell))
    throw Error("cell_likelihood: cell out of range");
  const Eigen::Vector3d delta(g.center0(cell.i) - m.u, 0.0,
                              g.center1(cell.j) - m.d);
  return gaussian_likelihood(delta, m.covariance, mode);
}

double cell_likelihood(CellIndex cell, const Measurement& m,
                       const GridGeometry& g, const CameraIntrinsics& cam,
                       NormalizationMode mode) {
  if (g.mode() == AxisMode::kUDisparity)
    return cell_likelihood(cell, m, g, mode);
  if (!g.contains(cell))
    throw Error("cell_likelihood: cell out of range");
  const Eigen::Vector2d p = ground_point(m, cam);
  const Eigen::Matrix3d tau = embed_ground_cov(ground_covariance(m, cam));
  const Eigen::Vector3d delta(g.center0(cell.i) - p.x(), 0.0,
                              g.center1(cell.j) - p.y());
  return gaussian_likelihood(delta, tau, mode);
}

namespace {

// Per-measurement evidence blob: mean position on the grid axes, the 2x2
// precision of the (axis0, axis1) offset, the normalization factor, and
// whether the cross term vanishes (separable fast path).
struct Blob {
  double mu0, mu1;
  double a, b, c;  // q(du, dd) = a du^2 + 2 c du dd + b dd^2
  double norm;
  bool diagonal;
};

Blob make_blob_udisparity(const Measurement& m, NormalizationMode mode) {
  Eigen::LLT<Eigen::Matrix3d> llt(m.covariance);
  if (llt.info() != Eigen::Success)
    throw InvalidMeasurement("build_grid: covariance not positive-definite");
  const Eigen::Matrix3d& l = llt.matrixLLT();
  const double sqrt_det = l(0, 0) * l(1, 1) * l(2, 2);
  const Eigen::Matrix3d prec = llt.solve(Eigen::Matrix3d::Identity());
  Blob blob{};
  blob.mu0 = m.u;
  blob.mu1 = m.d;
  blob.a = prec(0, 0);
  blob.b = prec(2, 2);
  blob.c = prec(0, 2);
  blob.norm = kNorm3 / sqrt_det;
  if (mode == NormalizationMode::kPaperLiteral) blob.norm /= sqrt_det;
  blob.diagonal = blob.c == 0.0;
  return blob;
}

Blob make_blob_metric(const Measurement& m, const CameraIntrinsics& cam,
                      NormalizationMode mode) {
  const Eigen::Vector2d p = ground_point(m, cam);
  const Eigen::Matrix3d tau = embed_ground_cov(ground_covariance(m, cam));
  Eigen::LLT<Eigen::Matrix3d> llt(tau);
  if (llt.info() != Eigen::Success)
    throw InvalidMeasurement("build_grid: projected covariance not SPD");
  const Eigen::Matrix3d& l = llt.matrixLLT();
  const double sqrt_det = l(0, 0) * l(1, 1) * l(2, 2);
  const Eigen::Matrix3d prec = llt.solve(Eigen::Matrix3d::Identity());
  Blob blob{};
  blob.mu0 = p.x();
  blob.mu1 = p.y();
  blob.a = prec(0, 0);
  blob.b = prec(2, 2);
  blob.c = prec(0, 2);
  blob.norm = kNorm3 / sqrt_det;
  if (mode == NormalizationMode::kPaperLiteral) blob.norm /= sqrt_det;
  blob.diagonal = blob.c == 0.0;
  return blob;
}

struct IndexRange {
  int lo, hi;  // inclusive; empty when lo > hi
};

// Cell indices whose centers may fall inside [x - w, x + w]; widened by one
// cell so the exact per-cell mask decides membership.
IndexRange index_window(double x, double w, double origin, double step,
                        int n) {
  if (!std::isfinite(w)) return {0, n - 1};
  const double f0 = (x - w - origin) / step;
  const double f1 = (x + w - origin) / step;
  int lo = static_cast<int>(std::floor(std::min(f0, f1))) - 1;
  int hi = static_cast<int>(std::ceil(std::max(f0, f1))) + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, n - 1);
  return {lo, hi};
}

// Accumulates into shared sum/compensation buffers. Workers operate on
// disjoint row bands with private scratch, so any thread count produces
// bit-identical sums (each cell sees the same measurement order).
class GridAccumulator {
 public:
  GridAccumulator(const GridGeometry& g, double truncation_sigma,
                  std::vector<double>& sums, std::vector<double>& comp)
      : geom_(g), r2_(truncation_sigma * truncation_sigma),
        truncated_(std::isfinite(truncation_sigma)), sums_(sums),
        comp_(comp) {
    if (!(truncation_sigma > 0.0))
      throw Error("build_grid: truncation radius must be > 0");
  }

  void accumulate(const std::vector<Blob>& blobs, int j_begin, int j_end) {
    for (const Blob& blob : blobs) splat_rows(blob, j_begin, j_end);
  }

 private:
  void splat_rows(const Blob& blob, int j_begin, int j_end);

  const GridGeometry& geom_;
  double r2_;
  bool truncated_;
  std::vector<double>& sums_;
  std::vector<double>& comp_;
  std::vector<double> colfac_;  // scratch, reused across measurements
};

void GridAccumulator::splat_rows(const Blob& blob, int j_begin, int j_end) {
  const int n_cols = geom_.n_cols();
  const double inf = std::numeric_limits<double>::infinity();

  // Bounding box of the truncation ellipse on both axes. The extent along
  // an axis of q <= r^2 is r * sqrt((Q^-1)_kk) for Q = [[a,c],[c,b]].
  const double det_q = blob.a * blob.b - blob.c * blob.c;
  const double w0 = truncated_ ? std::sqrt(r2_ * blob.b / det_q) : inf;
  const double w1 = truncated_ ? std::sqrt(r2_ * blob.a / det_q) : inf;

  IndexRange rows =
      index_window(blob.mu1, w1, geom_.origin1(), geom_.step1(),
                   geom_.n_rows());
  rows.lo = std::max(rows.lo, j_begin);
  rows.hi = std::min(rows.hi, j_end - 1);
  if (rows.lo > rows.hi) return;
  const IndexRange cols = index_window(blob.mu0, w0, geom_.origin0(),
                                       geom_.step0(), n_cols);
  if (cols.lo > cols.hi) return;

  if (blob.diagonal) {
    // Separable: exp(-(a du^2 + b dd^2)/2) = colfac(i) * rowfac(j).
    colfac_.resize(static_cast<std::size_t>(cols.hi - cols.lo) + 1);
    for (int i = cols.lo; i <= cols.hi; ++i) {
      const double du = geom_.center0(i) - blob.mu0;
      colfac_[i - cols.lo] = std::exp(-0.5 * blob.a * du * du);
    }
    const auto& k = kernels::active();
    for (int j = rows.lo; j <= rows.hi; ++j) {
      const double dd = geom_.center1(j) - blob.mu1;
      const double row_q = blob.b * dd * dd;
      int i0 = cols.lo, i1 = cols.hi;
      if (truncated_) {
        const double rem = r2_ - row_q;
        if (rem < 0.0) continue;
        // Row's admissible |du| <= sqrt(rem / a): a contiguous index span.
        const double s = std::sqrt(rem / blob.a);
        const IndexRange span = index_window(blob.mu0, s, geom_.origin0(),
                                             geom_.step0(), n_cols);
        i0 = std::max(i0, span.lo);
        i1 = std::min(i1, span.hi);
        // The window was widened by a cell; trim to the exact mask.
        while (i0 <= i1) {
          const double du = geom_.center0(i0) - blob.mu0;
          if (blob.a * du * du + row_q <= r2_) break;
          ++i0;
        }
        while (i1 >= i0) {
          const double du = geom_.center0(i1) - blob.mu0;
          if (blob.a * du * du + row_q <= r2_) break;
          --i1;
        }
        if (i0 > i1) continue;
      }
      const double rowfac = blob.norm * std::exp(-0.5 * row_q);
      const std::size_t base = static_cast<std::size_t>(j) * n_cols + i0;
      k.axpy_kahan(sums_.data() + base, comp_.data() + base,
                   colfac_.data() + (i0 - cols.lo), rowfac,
                   static_cast<std::size_t>(i1 - i0) + 1);
    }
    return;
  }

  // Cross-correlated axes (metric grids): plain per-cell evaluation.
  for (int j = rows.lo; j <= rows.hi; ++j) {
    const double dd = geom_.center1(j) - blob.mu1;
    for (int i = cols.lo; i <= cols.hi; ++i) {
      const double du = geom_.center0(i) - blob.mu0;
      const double q =
          blob.a * du * du + 2.0 * blob.c * du * dd + blob.b * dd * dd;
      if (truncated_ && q > r2_) continue;
      const double term = blob.norm * std::exp(-0.5 * q);
      const std::size_t idx = static_cast<std::size_t>(j) * n_cols + i;
      const double corrected = term - comp_[idx];
      const double old = sums_[idx];
      const double t = old + corrected;
      comp_[idx] = (t - old) - corrected;
      sums_[idx] = t;
    }
  }
}

OccupancyGrid build_from_blobs(const std::vector<Blob>& blobs,
                               const GridGeometry& g,
                               const GridBuildOptions& opt) {
  std::vector<double> sums(static_cast<std::size_t>(g.n_cols()) * g.n_rows(),
                           0.0);
  std::vector<double> comp(sums.size(), 0.0);

  int n_threads = opt.threads > 0
                      ? opt.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, g.n_rows()));
  if (n_threads == 1) {
    GridAccumulator acc(g, opt.truncation_sigma, sums, comp);
    acc.accumulate(blobs, 0, g.n_rows());
  } else {
    std::vector<std::thread> workers;
    const int band = (g.n_rows() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int j0 = t * band;
      const int j1 = std::min(g.n_rows(), j0 + band);
      if (j0 >= j1) break;
      workers.emplace_back([&, j0, j1] {
        GridAccumulator acc(g, opt.truncation_sigma, sums, comp);
        acc.accumulate(blobs, j0, j1);
      });
    }
    for (auto& w : workers) w.join();
  }
  OccupancyGrid grid(g);
  grid.values() = std::move(sums);
  return grid;
}

}  // namespace

OccupancyGrid build_grid(const MeasurementSet& ms, const GridGeometry& g,
                         const GridBuildOptions& opt) {
  if (g.mode() != AxisMode::kUDisparity)
    throw Error("build_grid: metric grid requires camera intrinsics");
  std::vector<Blob> blobs;
  blobs.reserve(ms.measurements.size());
  for (const Measurement& m : ms.measurements)
    blobs.push_back(make_blob_udisparity(m, opt.normalization));
  return build_from_blobs(blobs, g, opt);
}

OccupancyGrid build_grid(const MeasurementSet& ms, const GridGeometry& g,
                         const CameraIntrinsics& cam,
                         const GridBuildOptions& opt) {
  if (g.mode() == AxisMode::kUDisparity) return build_grid(ms, g, opt);
  std::vector<Blob> blobs;
  blobs.reserve(ms.measurements.size());
  for (const Measurement& m : ms.measurements)
    blobs.push_back(make_blob_metric(m, cam, opt.normalization));
  return build_from_blobs(blobs, g, opt);
}

void export_grid(const std::string& pgm_path, const std::string& json_path,
                 const OccupancyGrid& grid) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : grid.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (grid.values().empty()) lo = hi = 0.0;
  const double span = hi - lo;

  const GridGeometry& g = grid.geometry();
  ImageU16 img(g.n_cols(), g.n_rows(), 0);
  for (int j = 0; j < g.n_rows(); ++j) {
    for (int i = 0; i < g.n_cols(); ++i) {
      const double v = grid.at(i, j);
      const double q = span > 0.0 ? (v - lo) / span * 65535.0 : 0.0;
      img(i, j) = static_cast<std::uint16_t>(std::lround(q));
    }
  }
  write_gray16(pgm_path, img);

  nlohmann::json meta;
  meta["mode"] =
      g.mode() == AxisMode::kUDisparity ? "u-disparity" : "metric";
  meta["n_cols"] = g.n_cols();
  meta["n_rows"] = g.n_rows();
  meta["origin"] = {g.origin0(), g.origin1()};
  meta["step"] = {g.step0(), g.step1()};
  meta["frame_id"] = grid.frame_id();
  meta["min"] = lo;
  meta["max"] = hi;
  std::ofstream out(json_path);
  if (!out) throw FormatError(json_path + ": cannot open for writing");
  out << meta.dump(2) << "\n";
}

OccupancyGrid import_grid(const std::string& pgm_path,
                          const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw FormatError(json_path + ": cannot open");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path + ": " + e.what());
  }
  const std::string mode = meta.at("mode").get<std::string>();
  const GridGeometry g(
      mode == "u-disparity" ? AxisMode::kUDisparity : AxisMode::kMetricGround,
      meta.at("n_cols").get<int>(), meta.at("n_rows").get<int>(),
      meta.at("origin")[0].get<double>(), meta.at("origin")[1].get<double>(),
      meta.at("step")[0].get<double>(), meta.at("step")[1].get<double>());
  const double lo = meta.at("min").get<double>();
  const double hi = meta.at("max").get<double>();

  const ImageU16 img = read_gray16(pgm_path);
  if (img.width() != g.n_cols() || img.height() != g.n_rows())
    throw FormatError(pgm_path + ": size does not match sidecar geometry");
  OccupancyGrid grid(g, meta.value("frame_id", 0));
  for (int j = 0; j < g.n_rows(); ++j)
    for (int i = 0; i < g.n_cols(); ++i)
      grid.at(i, j) = lo + (hi - lo) * img(i, j) / 65535.0;
  return grid;
}

}  // namespace freespace
