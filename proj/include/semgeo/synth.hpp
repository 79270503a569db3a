#pragma once

// Procedural scenes built from fronto-parallel textured planes. The world
// frame is the reference (target) camera frame; frames are rendered by
// exact ray-plane intersection, so ground truth is closed form.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/diffopt.hpp"
#include "semgeo/geometry.hpp"

namespace semgeo {

enum class SceneKind { plane, two_plane, moving_object };

std::string scene_kind_name(SceneKind k);
/// Throws ArgumentError on unknown names.
SceneKind parse_scene_kind(const std::string& name);

/// Foreground rectangle in reference-image pixel indices, [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct SceneSpec {
  SceneKind kind = SceneKind::plane;
  int height = 64;
  int width = 64;
  CameraIntrinsics intrinsics{100.0, 100.0, 31.5, 31.5};
  double background_depth = 10.0;
  double foreground_depth = 7.0;
  PixelRect foreground{20, 20, 44, 44};
  std::uint64_t texture_seed = 1;
  /// Value-noise lattice spacing, in reference-image pixels at the surface's depth.
  double feature_px = 6.0;
  /// Peak-to-peak intensity range of the texture around 0.5.
  double contrast = 0.6;
  /// Foreground texture is the background texture shifted by this many lattice cells.
  double foreground_phase = 0.5;
  /// moving_object only: world translation of the foreground at source time.
  Eigen::Vector3d object_motion{0.2, 0.0, 0.0};

  /// Throws ArgumentError on invalid geometry.
  void validate() const;
};

/// Axis-aligned plane Z = depth with an optional rectangular extent.
struct Surface {
  double depth = 1.0;
  double x_min = -std::numeric_limits<double>::infinity();
  double x_max = std::numeric_limits<double>::infinity();
  double y_min = -std::numeric_limits<double>::infinity();
  double y_max = std::numeric_limits<double>::infinity();
  int label = 0;
  int instance = 0;
  bool moves = false;
  /// World size of one lattice cell.
  double cell = 1.0;
  double phase = 0.0;
};

struct Scene {
  SceneSpec spec;
  std::vector<Surface> surfaces;
  int class_count = 2;

  /// Texture colour of surface `s` at surface-local world coordinates (X, Y).
  std::array<double, 3> texture(int s, double x, double y) const;
};

Scene build_scene(const SceneSpec& spec);

struct Hit {
  int surface = -1;
  /// Camera-frame Z of the intersection.
  double depth = 0.0;
};

/// Nearest surface along the ray through continuous pixel (px, py) of a
/// camera with pose `pose` (world-to-camera). `object_time` scales the
/// foreground's motion (0 at the reference frame, 1 at the source frame).
Hit cast_ray(const Scene& scene, const Pose6& pose, const CameraIntrinsics& k, double px,
             double py, double object_time = 0.0);

struct RenderedFrame {
  Image image;
  DepthMap depth;
  SemanticLabelMap labels;
  InstanceLabelMap instances;
};

/// Pixels whose ray hits nothing are black, invalid depth, label 0, instance 0.
RenderedFrame render_frame(const Scene& scene, const Pose6& pose, const CameraIntrinsics& k,
                           double object_time = 0.0);

/// Evaluation-only data. Never handed to the solver.
struct GroundTruth {
  DepthMap depth;
  Pose6 pose;
  SemanticLabelMap labels;
  InstanceLabelMap instances;
  /// Flow from camera motion alone.
  FlowField rigid_flow;
  /// Flow including the foreground's own motion.
  FlowField flow;
  /// Pixels whose surface point is visible in the source frame.
  Mask noc;
  bool has_object_motion = false;
  Eigen::Vector3d object_motion = Eigen::Vector3d::Zero();
  /// Pixels on the independently moving surface.
  Mask moving;
};

struct ScenePair {
  AlignmentProblem problem;
  GroundTruth truth;
};

/// Target rendered at the reference pose, the single source at `baseline`.
/// The problem carries both frames' semantic maps and default losses.
ScenePair make_pair(const Scene& scene, const Pose6& baseline, const CameraIntrinsics& k);

/// Small seeded problem for derivative checks: 16x16 two-plane scene, two
/// pyramid levels, a generic pose. `variables` is a perturbed point away
/// from the optimum.
struct GradCheckProblem {
  AlignmentProblem problem;
  Variables variables;
};
GradCheckProblem make_gradcheck_problem(std::uint64_t seed, const LossSelection& losses);

}  // namespace semgeo
