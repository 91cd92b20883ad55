#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "freespace/config.hpp"

namespace freespace {

struct PipelineOptions {
  bool emit_per_frame = true;  // grids, profiles, overlays
  bool emit_pairs = true;      // detections, residual CSVs
  bool emit_map = true;        // map render + trajectory
};

// Runs the staged pipeline over cfg.frames and emits artifacts under
// cfg.output_dir. Returns the machine-readable run report (also written to
// run_report.json; stage timings go to timings.json, which is the only
// non-reproducible artifact). Stage failures throw Error tagged with the
// frame index and stage name; artifacts written so far are left in place.
nlohmann::json run_pipeline(const PipelineConfig& cfg,
                            const PipelineOptions& opt = {});

}  // namespace freespace
