#pragma once

#include <vector>

#include "freespace/flow_model.hpp"
#include "freespace/image.hpp"

namespace freespace {

struct Corner {
  int x, y;
  float response;
};

struct HarrisParams {
  double k = 0.04;              // corner response constant
  int smoothing_radius = 2;     // box window over gradient products
  double quality_level = 0.01;  // keep responses >= level * max response
  int nms_radius = 4;
  int max_corners = 1000;
};

// Harris corners, strongest first (ties broken by position so the order is
// deterministic). Uniform images yield no corners.
std::vector<Corner> harris_corners(const ImageU8& img,
                                   const HarrisParams& params = {});

struct MatchParams {
  HarrisParams harris;
  int patch_radius = 5;       // 11x11 zero-mean NCC patches
  int search_radius_u = 24;
  int search_radius_v = 8;
  double min_ncc = 0.7;
  // A backward match must land within this distance of the original corner.
  double fb_tolerance_px = 1.0;
  // Parabolic refinement of the NCC peak. Off by default so that integer
  // translations reproduce integer flows exactly; small ego-motion flows
  // need it to avoid quantizing toward zero.
  bool subpixel = false;
  // Matching parallelizes over keypoints; results are identical for any
  // worker count. 0 = hardware concurrency.
  int threads = 1;
};

// Harris corners in frame_i matched into frame_i1 by zero-mean NCC within
// the search window, kept only when the backward match agrees. Sample
// coordinates are centered on the image midpoint ((W-1)/2, (H-1)/2).
std::vector<FlowSample> detect_and_match(const ImageU8& frame_i,
                                         const ImageU8& frame_i1,
                                         const MatchParams& params = {});

}  // namespace freespace
