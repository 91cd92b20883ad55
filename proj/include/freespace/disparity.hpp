#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freespace/geometry.hpp"
#include "freespace/image.hpp"

namespace freespace {

// Dense disparity map in pixels with a distinguished invalid marker.
class DisparityImage {
 public:
  static constexpr float kInvalid = -1.0f;

  DisparityImage() = default;
  DisparityImage(int width, int height)
      : values_(width, height, kInvalid) {}

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }

  float at(int x, int y) const { return values_(x, y); }
  void set(int x, int y, float d) { values_(x, y) = d; }
  void set_invalid(int x, int y) { values_(x, y) = kInvalid; }
  bool valid(int x, int y) const { return values_(x, y) != kInvalid; }

  const Image<float>& values() const { return values_; }

 private:
  Image<float> values_;
};

// 16-bit disparity file (PNG or PGM): disparity = raw / 256, raw 0 invalid.
DisparityImage load_disparity(const std::string& path);
void save_disparity(const std::string& path, const DisparityImage& disp);

enum class SearchDirection {
  kLeftward,   // right-image candidate at x - d (standard stereo)
  kRightward,  // candidate at x + d (mirrored-input configurations)
};

struct BlockMatchParams {
  int window_radius = 4;
  int max_disparity = 64;
  // A winning cost must beat the second-best (outside d +/- 1) by this
  // relative margin, or the pixel is marked invalid.
  double uniqueness_ratio = 0.15;
  SearchDirection direction = SearchDirection::kLeftward;
  int threads = 0;  // 0 = hardware concurrency
};

// Winner-take-all SAD matcher along the epipolar row. Border pixels and
// pixels failing the uniqueness check are invalid. Deterministic for any
// thread count (rows are independent).
DisparityImage block_match(const ImageU8& left, const ImageU8& right,
                           const BlockMatchParams& params = {});

// Diagonal measurement covariance diag(su^2, sv^2, sd_eff^2) with
// sd_eff = sigma_d * (1 + sigma_d_slope * d).
struct CovarianceModel {
  double sigma_u = 0.5;
  double sigma_v = 0.5;
  double sigma_d = 1.0;
  double sigma_d_slope = 0.0;

  Eigen::Matrix3d covariance(double d) const;
};

struct MeasurementSet {
  std::vector<Measurement> measurements;
  // Valid lattice pixels left out because d = 0 cannot be triangulated.
  int skipped_zero_disparity = 0;

  std::size_t count() const { return measurements.size(); }
};

// One measurement per valid pixel on the stride lattice (x, y multiples of
// the strides). Pixels with d = 0 are skipped and tallied.
MeasurementSet measurements_from_disparity(const DisparityImage& img,
                                           int stride_u, int stride_v,
                                           const CovarianceModel& model);

}  // namespace freespace
