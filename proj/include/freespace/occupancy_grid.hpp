#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "freespace/disparity.hpp"
#include "freespace/geometry.hpp"

namespace freespace {

// Two normalization conventions are in circulation for the measurement
// likelihood: the trivariate normal divides by |tau|^(1/2), the literal
// variant by |tau|. Standard is the default; the literal form is kept as
// a switch. With a covariance shared by all measurements the two grids
// differ by the single factor |tau|^(1/2), so segmentation is unaffected
// once the threshold is rescaled.
enum class NormalizationMode { kStandard, kPaperLiteral };

NormalizationMode normalization_from_string(const std::string& s);
std::string to_string(NormalizationMode mode);

// Likelihood of error `delta` under a zero-mean Gaussian with covariance
// `tau`: (2*pi)^(-3/2) * |tau|^(-p) * exp(-delta' tau^-1 delta / 2),
// p = 1/2 (standard) or 1 (paper-literal). Throws unless tau is SPD.
double gaussian_likelihood(const Eigen::Vector3d& delta,
                           const Eigen::Matrix3d& tau,
                           NormalizationMode mode);

// Occupancy evidence a single measurement contributes to cell (i, j):
// the Gaussian evaluated at (u_ij - u_k, 0, d_ij - d_k). The v component
// is ignored by construction. Throws on out-of-range cells.
double cell_likelihood(CellIndex cell, const Measurement& m,
                       const GridGeometry& g, NormalizationMode mode);
// Metric-grid variant: the measurement is projected to the ground plane and
// its covariance propagated; the offset vector is (x_ij - x_k, 0, z_ij - z_k)
// under the projected covariance embedded with unit v-variance.
double cell_likelihood(CellIndex cell, const Measurement& m,
                       const GridGeometry& g, const CameraIntrinsics& cam,
                       NormalizationMode mode);

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const GridGeometry& g, int frame_id = 0)
      : geometry_(g), frame_id_(frame_id),
        likelihood_(static_cast<std::size_t>(g.n_cols()) * g.n_rows(), 0.0) {}

  const GridGeometry& geometry() const { return geometry_; }
  int frame_id() const { return frame_id_; }
  void set_frame_id(int id) { frame_id_ = id; }

  double at(int i, int j) const {
    return likelihood_[static_cast<std::size_t>(j) * geometry_.n_cols() + i];
  }
  double& at(int i, int j) {
    return likelihood_[static_cast<std::size_t>(j) * geometry_.n_cols() + i];
  }
  double* row(int j) {
    return likelihood_.data() +
           static_cast<std::size_t>(j) * geometry_.n_cols();
  }
  const double* row(int j) const {
    return likelihood_.data() +
           static_cast<std::size_t>(j) * geometry_.n_cols();
  }
  const std::vector<double>& values() const { return likelihood_; }
  std::vector<double>& values() { return likelihood_; }

 private:
  GridGeometry geometry_;
  int frame_id_ = 0;
  std::vector<double> likelihood_;
};

struct GridBuildOptions {
  NormalizationMode normalization = NormalizationMode::kStandard;
  // Mahalanobis truncation radius in sigma; infinity() disables truncation.
  double truncation_sigma = 4.0;
  int threads = 1;
};

// D(i,j) = sum_k L_ij(m_k), truncated to cells within the Mahalanobis
// radius of each measurement. Accumulation is Kahan-compensated per cell
// and banded over grid rows, so results are bit-identical for any thread
// count. The u-disparity overload needs no camera.
OccupancyGrid build_grid(const MeasurementSet& ms, const GridGeometry& g,
                         const GridBuildOptions& opt = {});
OccupancyGrid build_grid(const MeasurementSet& ms, const GridGeometry& g,
                         const CameraIntrinsics& cam,
                         const GridBuildOptions& opt);

// 16-bit PGM render plus sidecar JSON holding the geometry and the linear
// min/max quantization; import inverts the scaling.
void export_grid(const std::string& pgm_path, const std::string& json_path,
                 const OccupancyGrid& grid);
OccupancyGrid import_grid(const std::string& pgm_path,
                          const std::string& json_path);

}  // namespace freespace
