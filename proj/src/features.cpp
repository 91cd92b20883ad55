#include "freespace/features.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include "freespace/error.hpp"
#include "freespace/kernels.hpp"

namespace freespace {

namespace {

// Sobel gradients, interior pixels only.
void sobel(const ImageU8& img, ImageF32& gx, ImageF32& gy) {
  const int w = img.width(), h = img.height();
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const auto p = [&](int dx, int dy) {
        return static_cast<float>(img(x + dx, y + dy));
      };
      gx(x, y) = (p(1, -1) + 2.0f * p(1, 0) + p(1, 1)) -
                 (p(-1, -1) + 2.0f * p(-1, 0) + p(-1, 1));
      gy(x, y) = (p(-1, 1) + 2.0f * p(0, 1) + p(1, 1)) -
                 (p(-1, -1) + 2.0f * p(0, -1) + p(1, -1));
    }
  }
}

// Separable triangle smoothing (weights r+1-|k|). Center-weighted so the
// response peaks at the pixels nearest a corner instead of forming a flat
// plateau the way a box window does. Borders of width r are left zero.
Image<double> triangle_smooth(const ImageF32& src, int r) {
  const int w = src.width(), h = src.height();
  Image<double> tmp(w, h, 0.0), out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = r; x < w - r; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k)
        acc += (r + 1 - std::abs(k)) * static_cast<double>(src(x + k, y));
      tmp(x, y) = acc;
    }
  }
  for (int y = r; y < h - r; ++y) {
    for (int x = r; x < w - r; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k)
        acc += (r + 1 - std::abs(k)) * tmp(x, y + k);
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<Corner> harris_corners(const ImageU8& img,
                                   const HarrisParams& params) {
  const int w = img.width(), h = img.height();
  if (w < 3 || h < 3) return {};
  ImageF32 gx(w, h, 0.0f), gy(w, h, 0.0f);
  sobel(img, gx, gy);

  const auto& k = kernels::active();
  ImageF32 gxx(w, h, 0.0f), gyy(w, h, 0.0f), gxy(w, h, 0.0f);
  k.mul_f32(gxx.data(), gx.data(), gx.data(), gx.size());
  k.mul_f32(gyy.data(), gy.data(), gy.data(), gy.size());
  k.mul_f32(gxy.data(), gx.data(), gy.data(), gx.size());

  const int r = params.smoothing_radius;
  const Image<double> sxx = triangle_smooth(gxx, r);
  const Image<double> syy = triangle_smooth(gyy, r);
  const Image<double> sxy = triangle_smooth(gxy, r);
  ImageF32 response(w, h, 0.0f);
  float max_response = 0.0f;
  for (int y = r + 1; y < h - r - 1; ++y) {
    for (int x = r + 1; x < w - r - 1; ++x) {
      const double a = sxx(x, y);
      const double b = syy(x, y);
      const double c = sxy(x, y);
      const double trace = a + b;
      const double det = a * b - c * c;
      const float resp = static_cast<float>(det - params.k * trace * trace);
      response(x, y) = resp;
      max_response = std::max(max_response, resp);
    }
  }
  if (!(max_response > 0.0f)) return {};

  const float threshold =
      static_cast<float>(params.quality_level) * max_response;
  std::vector<Corner> corners;
  const int nr = params.nms_radius;
  for (int y = r + 1; y < h - r - 1; ++y) {
    for (int x = r + 1; x < w - r - 1; ++x) {
      const float resp = response(x, y);
      if (resp < threshold) continue;
      bool is_max = true;
      for (int dy = -nr; dy <= nr && is_max; ++dy) {
        for (int dx = -nr; dx <= nr; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (!response.in_bounds(nx, ny)) continue;
          const float other = response(nx, ny);
          // Strict on one side of the raster order so plateaus keep
          // exactly one representative.
          if (other > resp ||
              (other == resp && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) corners.push_back({x, y, resp});
    }
  }
  std::sort(corners.begin(), corners.end(), [](const Corner& a,
                                               const Corner& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(corners.size()) > params.max_corners)
    corners.resize(params.max_corners);
  return corners;
}

namespace {

// Zero-mean patch around (x, y); returns false when it leaves the image or
// is textureless (zero norm).
bool extract_patch(const ImageU8& img, int x, int y, int radius,
                   std::vector<float>& out, float& norm) {
  const int side = 2 * radius + 1;
  if (x < radius || y < radius || x >= img.width() - radius ||
      y >= img.height() - radius)
    return false;
  out.resize(static_cast<std::size_t>(side) * side);
  std::size_t idx = 0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      out[idx++] = static_cast<float>(img(x + dx, y + dy));
  const auto& k = kernels::active();
  const float mean = k.sum_f32(out.data(), out.size()) /
                     static_cast<float>(out.size());
  for (float& v : out) v -= mean;
  norm = std::sqrt(k.dot_f32(out.data(), out.data(), out.size()));
  return norm > 0.0f;
}

struct MatchHit {
  int x, y;
  float score;
  double sub_x = 0.0, sub_y = 0.0;  // refined position when enabled
};

float ncc_at(const ImageU8& img, const std::vector<float>& patch,
             float patch_norm, int x, int y, int radius) {
  std::vector<float> cand;
  float cand_norm = 0.0f;
  if (!extract_patch(img, x, y, radius, cand, cand_norm)) return -2.0f;
  const auto& k = kernels::active();
  return k.dot_f32(patch.data(), cand.data(), patch.size()) /
         (patch_norm * cand_norm);
}

// Offset of a parabola through three samples, clamped to half a pixel.
double parabola_offset(float s_lo, float s0, float s_hi) {
  const double denom = s_lo - 2.0 * s0 + s_hi;
  if (denom >= 0.0) return 0.0;  // not a peak
  const double d = 0.5 * (s_lo - s_hi) / denom;
  return std::clamp(d, -0.5, 0.5);
}

// Best NCC position for `patch` inside the window centered at (cx, cy).
std::optional<MatchHit> best_match(const ImageU8& img,
                                   const std::vector<float>& patch,
                                   float patch_norm, int cx, int cy,
                                   const MatchParams& p) {
  const auto& k = kernels::active();
  std::vector<float> cand;
  float cand_norm = 0.0f;
  std::optional<MatchHit> best;
  for (int y = cy - p.search_radius_v; y <= cy + p.search_radius_v; ++y) {
    for (int x = cx - p.search_radius_u; x <= cx + p.search_radius_u; ++x) {
      if (!extract_patch(img, x, y, p.patch_radius, cand, cand_norm))
        continue;
      const float score =
          k.dot_f32(patch.data(), cand.data(), patch.size()) /
          (patch_norm * cand_norm);
      if (!best || score > best->score) best = MatchHit{x, y, score};
    }
  }
  if (!best || best->score < static_cast<float>(p.min_ncc))
    return std::nullopt;
  best->sub_x = best->x;
  best->sub_y = best->y;
  if (p.subpixel) {
    const float left = ncc_at(img, patch, patch_norm, best->x - 1, best->y,
                              p.patch_radius);
    const float right = ncc_at(img, patch, patch_norm, best->x + 1, best->y,
                               p.patch_radius);
    const float up = ncc_at(img, patch, patch_norm, best->x, best->y - 1,
                            p.patch_radius);
    const float down = ncc_at(img, patch, patch_norm, best->x, best->y + 1,
                              p.patch_radius);
    if (left > -2.0f && right > -2.0f)
      best->sub_x += parabola_offset(left, best->score, right);
    if (up > -2.0f && down > -2.0f)
      best->sub_y += parabola_offset(up, best->score, down);
  }
  return best;
}

}  // namespace

std::vector<FlowSample> detect_and_match(const ImageU8& frame_i,
                                         const ImageU8& frame_i1,
                                         const MatchParams& params) {
  if (frame_i.width() != frame_i1.width() ||
      frame_i.height() != frame_i1.height())
    throw Error("detect_and_match: frame dimension mismatch");

  const std::vector<Corner> corners = harris_corners(frame_i, params.harris);
  const double cx0 = 0.5 * (frame_i.width() - 1);
  const double cy0 = 0.5 * (frame_i.height() - 1);

  // One slot per corner so the output order (and content) is independent
  // of how the corners are split across workers.
  std::vector<std::optional<FlowSample>> slots(corners.size());
  const auto match_range = [&](std::size_t begin, std::size_t end) {
    std::vector<float> patch, back_patch;
    float norm = 0.0f, back_norm = 0.0f;
    for (std::size_t k = begin; k < end; ++k) {
      const Corner& c = corners[k];
      if (!extract_patch(frame_i, c.x, c.y, params.patch_radius, patch,
                         norm))
        continue;
      const auto fwd = best_match(frame_i1, patch, norm, c.x, c.y, params);
      if (!fwd) continue;
      // Backward check: the matched patch must come home.
      if (!extract_patch(frame_i1, fwd->x, fwd->y, params.patch_radius,
                         back_patch, back_norm))
        continue;
      const auto bwd = best_match(frame_i, back_patch, back_norm, fwd->x,
                                  fwd->y, params);
      if (!bwd) continue;
      const double dx = bwd->x - c.x, dy = bwd->y - c.y;
      if (std::sqrt(dx * dx + dy * dy) > params.fb_tolerance_px) continue;

      slots[k] = FlowSample(c.x - cx0, c.y - cy0, fwd->sub_x - c.x,
                            fwd->sub_y - c.y, static_cast<double>(c.x),
                            static_cast<double>(c.y));
    }
  };

  int n_threads = params.threads > 0
                      ? params.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(
      1, std::min<int>(n_threads, static_cast<int>(corners.size())));
  if (n_threads <= 1) {
    match_range(0, corners.size());
  } else {
    std::vector<std::thread> workers;
    const std::size_t chunk = (corners.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(corners.size(), begin + chunk);
      if (begin >= end) break;
      workers.emplace_back([&, begin, end] { match_range(begin, end); });
    }
    for (auto& w : workers) w.join();
  }

  std::vector<FlowSample> samples;
  for (const auto& slot : slots)
    if (slot) samples.push_back(*slot);
  return samples;
}

}  // namespace freespace
