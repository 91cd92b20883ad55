#pragma once

#include <cstdint>
#include <vector>

#include "freespace/rng.hpp"

namespace freespace {

// One matched keypoint with its frame-to-frame flow. Coordinates are
// centered at the image midpoint; the flow magnitude is tied to the flow
// components by construction.
struct FlowSample {
  double u = 0.0;    // centered image coordinates of the frame-i keypoint
  double v = 0.0;
  double f_u = 0.0;  // flow components, pixels
  double f_v = 0.0;
  double psi = 0.0;  // sqrt(f_u^2 + f_v^2)

  // Raw pixel coordinates in frame i, kept for disparity lookups and
  // export; not used by the model.
  double x_px = 0.0;
  double y_px = 0.0;

  FlowSample() = default;
  FlowSample(double u_, double v_, double fu, double fv, double x_px_ = 0.0,
             double y_px_ = 0.0);
};

// Background flow-magnitude surface
//   psi = c1 u^3 + c2 v^3 + c3 u^2 v + c4 u v^2 + c5 u^2 + c6 v^2
//       + c7 u v + c8 u + c9 v + c10
// for degree 3; degrees 2 and 1 keep the corresponding suffixes (6 and 3
// coefficients). Coefficients are stored in that order.
struct PolynomialFlowModel {
  int degree = 1;
  std::vector<double> coefficients;

  static int coefficient_count(int degree);  // (d+1)(d+2)/2
};

// Monomial basis at (u, v) in coefficient order for the given degree.
std::vector<double> polynomial_basis(int degree, double u, double v);

double evaluate_model(const PolynomialFlowModel& model, double u, double v);

// Least-squares coefficients via column-pivoted QR of the design matrix.
// Throws FitError when underdetermined or rank-deficient.
PolynomialFlowModel fit_least_squares(const std::vector<FlowSample>& samples,
                                      const std::vector<std::size_t>& subset,
                                      int degree);
PolynomialFlowModel fit_least_squares(const std::vector<FlowSample>& samples,
                                      int degree);

struct RansacConfig {
  double sample_fraction = 0.40;
  int iterations = 20;
  double inlier_epsilon = 2.0;
  std::uint64_t seed = 0;
};

struct RansacResult {
  PolynomialFlowModel model;      // refit on the winning inlier set
  std::vector<bool> inlier;      // |residual| <= epsilon vs final model
  std::vector<double> residuals;  // psi_k - f(u_k, v_k) vs final model
  int best_iteration = -1;
  std::size_t subset_size = 0;
};

// Draw ceil(fraction * N) samples per iteration (without replacement, one
// substream per iteration), fit jointly, count inliers over all samples.
// Most inliers wins; ties break on lower total inlier residual, then lower
// iteration index. The winner is refit once on its inlier set.
RansacResult fit_flow_model_ransac(const std::vector<FlowSample>& samples,
                                   int degree, const RansacConfig& cfg);

enum class MotionLabel { kBackground, kDynamic };

// Dynamic iff |psi - f(u, v)| > epsilon; equality stays background.
std::vector<MotionLabel> classify_dynamic(
    const std::vector<FlowSample>& samples, const PolynomialFlowModel& model,
    double inlier_epsilon);

}  // namespace freespace
