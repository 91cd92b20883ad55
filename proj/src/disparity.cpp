#include "freespace/disparity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "freespace/error.hpp"
#include "freespace/image_io.hpp"
#include "freespace/kernels.hpp"

namespace freespace {

DisparityImage load_disparity(const std::string& path) {
  const ImageU16 raw = read_gray16(path);
  DisparityImage disp(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      const std::uint16_t v = raw(x, y);
      if (v == 0) continue;  // constructor initialized to invalid
      disp.set(x, y, static_cast<float>(v) / 256.0f);
    }
  }
  return disp;
}

void save_disparity(const std::string& path, const DisparityImage& disp) {
  ImageU16 raw(disp.width(), disp.height(), 0);
  for (int y = 0; y < disp.height(); ++y) {
    for (int x = 0; x < disp.width(); ++x) {
      if (!disp.valid(x, y)) continue;
      const long q = std::lround(disp.at(x, y) * 256.0);
      raw(x, y) = static_cast<std::uint16_t>(
          std::clamp<long>(q, 0, std::numeric_limits<std::uint16_t>::max()));
    }
  }
  write_gray16(path, raw);
}

namespace {

void match_rows(const ImageU8& left, const ImageU8& right,
                const BlockMatchParams& p, int y_begin, int y_end,
                DisparityImage& out) {
  const auto& k = kernels::active();
  const int wr = p.window_radius;
  const int width = left.width();
  const int win = 2 * wr + 1;
  const int sign = p.direction == SearchDirection::kLeftward ? -1 : 1;
  std::vector<std::uint32_t> costs(static_cast<std::size_t>(p.max_disparity) +
                                   1);

  for (int y = y_begin; y < y_end; ++y) {
    if (y < wr || y >= left.height() - wr) continue;
    for (int x = wr; x < width - wr; ++x) {
      // Candidate disparities whose window stays inside the right image.
      int d_max = p.max_disparity;
      if (sign < 0) {
        d_max = std::min(d_max, x - wr);
      } else {
        d_max = std::min(d_max, width - 1 - wr - x);
      }
      if (d_max < 0) continue;

      int best_d = 0;
      std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
      for (int d = 0; d <= d_max; ++d) {
        std::uint32_t cost = 0;
        const int rx = x + sign * d;
        for (int wy = -wr; wy <= wr; ++wy) {
          cost += k.sad_u8(&left.row(y + wy)[x - wr],
                           &right.row(y + wy)[rx - wr],
                           static_cast<std::size_t>(win));
        }
        costs[d] = cost;
        if (cost < best) {
          best = cost;
          best_d = d;
        }
      }

      // Second-best outside the immediate neighborhood of the winner.
      std::uint32_t second = std::numeric_limits<std::uint32_t>::max();
      for (int d = 0; d <= d_max; ++d) {
        if (std::abs(d - best_d) <= 1) continue;
        second = std::min(second, costs[d]);
      }
      if (second == std::numeric_limits<std::uint32_t>::max()) continue;
      if (static_cast<double>(second) <=
          static_cast<double>(best) * (1.0 + p.uniqueness_ratio))
        continue;
      out.set(x, y, static_cast<float>(best_d));
    }
  }
}

}  // namespace

DisparityImage block_match(const ImageU8& left, const ImageU8& right,
                           const BlockMatchParams& params) {
  if (left.width() != right.width() || left.height() != right.height())
    throw Error("block_match: image dimension mismatch");
  DisparityImage out(left.width(), left.height());

  int n_threads = params.threads > 0
                      ? params.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, left.height()));
  if (n_threads == 1) {
    match_rows(left, right, params, 0, left.height(), out);
    return out;
  }
  std::vector<std::thread> workers;
  const int band = (left.height() + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const int y0 = t * band;
    const int y1 = std::min(left.height(), y0 + band);
    if (y0 >= y1) break;
    workers.emplace_back([&, y0, y1] {
      match_rows(left, right, params, y0, y1, out);
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

Eigen::Matrix3d CovarianceModel::covariance(double d) const {
  const double sd = sigma_d * (1.0 + sigma_d_slope * d);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  cov(0, 0) = sigma_u * sigma_u;
  cov(1, 1) = sigma_v * sigma_v;
  cov(2, 2) = sd * sd;
  return cov;
}

MeasurementSet measurements_from_disparity(const DisparityImage& img,
                                           int stride_u, int stride_v,
                                           const CovarianceModel& model) {
  if (stride_u < 1 || stride_v < 1)
    throw Error("measurements_from_disparity: stride must be >= 1");
  MeasurementSet set;
  for (int y = 0; y < img.height(); y += stride_v) {
    for (int x = 0; x < img.width(); x += stride_u) {
      if (!img.valid(x, y)) continue;
      const double d = img.at(x, y);
      if (!(d > 0.0)) {
        ++set.skipped_zero_disparity;
        continue;
      }
      set.measurements.emplace_back(static_cast<double>(x),
                                    static_cast<double>(y), d,
                                    model.covariance(d));
    }
  }
  return set;
}

}  // namespace freespace
