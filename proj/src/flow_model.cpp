#include "freespace/flow_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "freespace/error.hpp"

namespace freespace {

FlowSample::FlowSample(double u_, double v_, double fu, double fv,
                       double x_px_, double y_px_)
    : u(u_), v(v_), f_u(fu), f_v(fv),
      psi(std::sqrt(fu * fu + fv * fv)), x_px(x_px_), y_px(y_px_) {}

int PolynomialFlowModel::coefficient_count(int degree) {
  if (degree < 1 || degree > 3)
    throw FitError("flow model: degree must be 1, 2 or 3");
  return (degree + 1) * (degree + 2) / 2;
}

std::vector<double> polynomial_basis(int degree, double u, double v) {
  switch (degree) {
    case 1:
      return {u, v, 1.0};
    case 2:
      return {u * u, v * v, u * v, u, v, 1.0};
    case 3:
      return {u * u * u, v * v * v, u * u * v, u * v * v, u * u,
              v * v,     u * v,     u,         v,         1.0};
    default:
      throw FitError("flow model: degree must be 1, 2 or 3");
  }
}

double evaluate_model(const PolynomialFlowModel& model, double u, double v) {
  const std::vector<double> basis = polynomial_basis(model.degree, u, v);
  if (model.coefficients.size() != basis.size())
    throw FitError("flow model: coefficient count does not match degree");
  double acc = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k)
    acc += model.coefficients[k] * basis[k];
  return acc;
}

PolynomialFlowModel fit_least_squares(const std::vector<FlowSample>& samples,
                                      const std::vector<std::size_t>& subset,
                                      int degree) {
  const int n_coef = PolynomialFlowModel::coefficient_count(degree);
  const std::size_t n = subset.size();
  if (n < static_cast<std::size_t>(n_coef))
    throw FitError("fit_least_squares: " + std::to_string(n) +
                   " samples for " + std::to_string(n_coef) +
                   " coefficients");

  Eigen::MatrixXd design(n, n_coef);
  Eigen::VectorXd rhs(n);
  for (std::size_t r = 0; r < n; ++r) {
    const FlowSample& s = samples[subset[r]];
    const std::vector<double> basis = polynomial_basis(degree, s.u, s.v);
    for (int k = 0; k < n_coef; ++k) design(r, k) = basis[k];
    rhs(r) = s.psi;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < n_coef)
    throw FitError("fit_least_squares: rank-deficient design matrix (rank " +
                   std::to_string(qr.rank()) + " of " +
                   std::to_string(n_coef) + ")");

  PolynomialFlowModel model;
  model.degree = degree;
  const Eigen::VectorXd coef = qr.solve(rhs);
  model.coefficients.assign(coef.data(), coef.data() + n_coef);
  return model;
}

PolynomialFlowModel fit_least_squares(const std::vector<FlowSample>& samples,
                                      int degree) {
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_least_squares(samples, all, degree);
}

namespace {

std::vector<double> model_residuals(const std::vector<FlowSample>& samples,
                                    const PolynomialFlowModel& model) {
  std::vector<double> res(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k)
    res[k] = samples[k].psi - evaluate_model(model, samples[k].u,
                                             samples[k].v);
  return res;
}

}  // namespace

RansacResult fit_flow_model_ransac(const std::vector<FlowSample>& samples,
                                   int degree, const RansacConfig& cfg) {
  const int n_coef = PolynomialFlowModel::coefficient_count(degree);
  if (!(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0))
    throw FitError("ransac: sample_fraction must be in (0, 1]");
  if (cfg.iterations < 1) throw FitError("ransac: iterations must be >= 1");
  if (!(cfg.inlier_epsilon > 0.0))
    throw FitError("ransac: inlier_epsilon must be > 0");

  const std::size_t n = samples.size();
  const std::size_t subset_size = static_cast<std::size_t>(
      std::ceil(cfg.sample_fraction * static_cast<double>(n)));
  if (subset_size < static_cast<std::size_t>(n_coef))
    throw FitError("ransac: subset of " + std::to_string(subset_size) +
                   " cannot solve for " + std::to_string(n_coef) +
                   " coefficients");

  PolynomialFlowModel best_model;
  std::size_t best_inliers = 0;
  double best_residual_sum = std::numeric_limits<double>::infinity();
  int best_iteration = -1;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(iter));
    const std::vector<std::size_t> subset =
        rng.sample_without_replacement(n, subset_size);
    PolynomialFlowModel model;
    try {
      model = fit_least_squares(samples, subset, degree);
    } catch (const FitError&) {
      continue;  // degenerate subset; try the next iteration
    }

    std::size_t inliers = 0;
    double residual_sum = 0.0;
    for (const FlowSample& s : samples) {
      const double r = std::abs(s.psi - evaluate_model(model, s.u, s.v));
      if (r <= cfg.inlier_epsilon) {
        ++inliers;
        residual_sum += r;
      }
    }
    if (inliers > best_inliers ||
        (inliers == best_inliers && residual_sum < best_residual_sum)) {
      best_inliers = inliers;
      best_residual_sum = residual_sum;
      best_model = model;
      best_iteration = iter;
    }
  }

  if (best_iteration < 0)
    throw FitError("ransac: no iteration produced a solvable subset");

  // One refit on the winning inlier set; keep the iteration model if the
  // inlier geometry turns out degenerate.
  std::vector<std::size_t> winners;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::abs(
        samples[k].psi - evaluate_model(best_model, samples[k].u,
                                        samples[k].v));
    if (r <= cfg.inlier_epsilon) winners.push_back(k);
  }
  PolynomialFlowModel final_model = best_model;
  if (winners.size() >= static_cast<std::size_t>(n_coef)) {
    try {
      final_model = fit_least_squares(samples, winners, degree);
    } catch (const FitError&) {
    }
  }

  RansacResult result;
  result.model = final_model;
  result.residuals = model_residuals(samples, final_model);
  result.inlier.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    result.inlier[k] = std::abs(result.residuals[k]) <= cfg.inlier_epsilon;
  result.best_iteration = best_iteration;
  result.subset_size = subset_size;
  return result;
}

std::vector<MotionLabel> classify_dynamic(
    const std::vector<FlowSample>& samples, const PolynomialFlowModel& model,
    double inlier_epsilon) {
  std::vector<MotionLabel> labels(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double r = std::abs(
        samples[k].psi - evaluate_model(model, samples[k].u, samples[k].v));
    labels[k] = r > inlier_epsilon ? MotionLabel::kDynamic
                                   : MotionLabel::kBackground;
  }
  return labels;
}

}  // namespace freespace
