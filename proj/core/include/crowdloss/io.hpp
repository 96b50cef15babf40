#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "crowdloss/anchors.hpp"
#include "crowdloss/evalkit.hpp"
#include "crowdloss/scene.hpp"

namespace crowdloss::io {

/// Shortest round-trip decimal form of a double (17 significant digits).
std::string format_real(double v);

// Scene text format:
//   extent W H
//   ped <full x1 y1 x2 y2> <visible x1 y1 x2 y2>
//   distractor x1 y1 x2 y2
// Blank lines and lines starting with '#' are skipped.
void write_scene(std::ostream& os, const Scene& scene);
Scene read_scene(std::istream& is);
Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& scene);

// Grid format: header "width height stride", then one row per line.
void write_probability_map(std::ostream& os, const ProbabilityMap& map);
ProbabilityMap read_probability_map(std::istream& is);
void write_target_map(std::ostream& os, const TargetMap& map);
TargetMap read_target_map(std::istream& is);

// CSV: scene_id,x1,y1,x2,y2,score
void write_detections_csv(std::ostream& os, const std::vector<Detection>& dets);
std::vector<Detection> read_detections_csv(std::istream& is);

// CSV: threshold,fppi,miss_rate
void write_curve_csv(std::ostream& os, const EvalCurve& curve);

}  // namespace crowdloss::io
