#pragma once

// Command-line entry point. Subcommands:
//   synth           render a scene: <out>/frames (solver inputs) and <out>/gt
//   align INPUT     direct alignment on INPUT/frames only
//   eval-depth      depth metrics of a prediction PNG against a ground-truth PNG
//   eval-flow       flow metrics of a prediction PNG against a ground-truth PNG
//   gradcheck       finite-difference check of every active loss term
//   sweep-lighting  depth error as all frames are darkened from 1.0 to 0.1
//   encode INPUT    augmented input channels of INPUT/frames
// Every command that writes an output directory also writes config.resolved.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "semgeo/config.hpp"
#include "semgeo/diffopt.hpp"

namespace semgeo {

/// Returns the process exit status. Errors are reported on `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The solver-visible half of a synth output directory.
struct FrameSet {
  Image target;
  std::vector<Image> sources;
  SemanticLabelMap target_labels;
  std::vector<SemanticLabelMap> source_labels;
  InstanceLabelMap target_instances;
  CameraIntrinsics intrinsics;
};

/// Reads `<dir>/frames`. Refuses directories that look like ground truth.
/// Label maps are optional unless `need_labels`.
FrameSet read_frames(const std::filesystem::path& dir, int class_count, bool need_labels);
void write_frames(const std::filesystem::path& dir, const FrameSet& frames);

std::string format_pose(const Pose6& p);
Pose6 parse_pose(const std::string& text);

/// iteration,total,<term>... with one row per trace entry.
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace semgeo
