#include "semgeo/synth.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "semgeo/photometric.hpp"

namespace semgeo {

namespace {

// splitmix64 finalizer, used as a coordinate hash for the noise lattice.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice_value(std::uint64_t seed, int octave, int channel, long ix, long iy) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(octave * 4 + channel));
  h = mix(h ^ static_cast<std::uint64_t>(ix));
  h = mix(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, int octave, int channel, double u, double v) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const long ix = static_cast<long>(fu);
  const long iy = static_cast<long>(fv);
  const double a = u - fu;
  const double b = v - fv;
  const double v00 = lattice_value(seed, octave, channel, ix, iy);
  const double v10 = lattice_value(seed, octave, channel, ix + 1, iy);
  const double v01 = lattice_value(seed, octave, channel, ix, iy + 1);
  const double v11 = lattice_value(seed, octave, channel, ix + 1, iy + 1);
  return (1 - a) * (1 - b) * v00 + a * (1 - b) * v10 + (1 - a) * b * v01 + a * b * v11;
}

double pixel_edge(double pixel, double c, double f, double depth) {
  return (pixel - 0.5 - c) / f * depth;
}

}  // namespace

std::string scene_kind_name(SceneKind k) {
  switch (k) {
    case SceneKind::plane: return "plane";
    case SceneKind::two_plane: return "two_plane";
    case SceneKind::moving_object: return "moving_object";
  }
  return "";
}

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "plane") return SceneKind::plane;
  if (name == "two_plane") return SceneKind::two_plane;
  if (name == "moving_object") return SceneKind::moving_object;
  throw ArgumentError("unknown scene kind '" + name + "'");
}

void SceneSpec::validate() const {
  if (height < 2 || width < 2) throw ArgumentError("scene: image must be at least 2x2");
  intrinsics.validate();
  const auto depth_ok = [](double z) { return z > 0.001 && z < 80.0; };
  if (!depth_ok(background_depth)) throw ArgumentError("scene: background depth outside (0.001, 80)");
  if (!(feature_px > 0.0)) throw ArgumentError("scene: feature size must be positive");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ArgumentError("scene: contrast must lie in [0, 1]");
  if (!std::isfinite(foreground_phase) || !object_motion.allFinite()) {
    throw ArgumentError("scene: non-finite texture phase or object motion");
  }
  if (kind == SceneKind::plane) return;
  if (!depth_ok(foreground_depth)) throw ArgumentError("scene: foreground depth outside (0.001, 80)");
  if (!(foreground_depth < background_depth)) {
    throw ArgumentError("scene: foreground must be nearer than the background");
  }
  const PixelRect& r = foreground;
  if (r.x0 < 0 || r.y0 < 0 || r.x1 > width || r.y1 > height || r.x0 >= r.x1 || r.y0 >= r.y1) {
    throw ArgumentError("scene: foreground rectangle must be non-empty and inside the image");
  }
  if (kind == SceneKind::moving_object && background_depth - (foreground_depth + object_motion.z()) <= 0.0) {
    throw ArgumentError("scene: moving object would pass behind the background");
  }
}

std::array<double, 3> Scene::texture(int s, double x, double y) const {
  const Surface& sf = surfaces.at(s);
  const double u = x / sf.cell + sf.phase;
  const double v = y / sf.cell + sf.phase;
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double n = 0.65 * value_noise(spec.texture_seed, 0, c, u, v) +
                     0.35 * value_noise(spec.texture_seed, 1, c, 2.0 * u, 2.0 * v);
    rgb[c] = 0.5 + spec.contrast * (n - 0.5);
  }
  return rgb;
}

Scene build_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  const CameraIntrinsics& k = spec.intrinsics;
  Surface bg;
  bg.depth = spec.background_depth;
  bg.cell = spec.feature_px * spec.background_depth / k.fx;
  scene.surfaces.push_back(bg);
  if (spec.kind != SceneKind::plane) {
    const double z = spec.foreground_depth;
    Surface fg;
    fg.depth = z;
    fg.x_min = pixel_edge(spec.foreground.x0, k.cx, k.fx, z);
    fg.x_max = pixel_edge(spec.foreground.x1, k.cx, k.fx, z);
    fg.y_min = pixel_edge(spec.foreground.y0, k.cy, k.fy, z);
    fg.y_max = pixel_edge(spec.foreground.y1, k.cy, k.fy, z);
    fg.label = 1;
    fg.instance = 1;
    fg.moves = spec.kind == SceneKind::moving_object;
    fg.cell = spec.feature_px * z / k.fx;
    fg.phase = spec.foreground_phase;
    scene.surfaces.push_back(fg);
  }
  return scene;
}

Hit cast_ray(const Scene& scene, const Pose6& pose, const CameraIntrinsics& k, double px,
             double py, double object_time) {
  const Eigen::Matrix3d r = rotation_from_axis_angle(pose.r);
  const Eigen::Vector3d centre = -r.transpose() * pose.t;
  const Eigen::Vector3d ray((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d dir = r.transpose() * ray;
  Hit best;
  for (std::size_t s = 0; s < scene.surfaces.size(); ++s) {
    const Surface& sf = scene.surfaces[s];
    const Eigen::Vector3d shift = sf.moves ? Eigen::Vector3d(object_time * scene.spec.object_motion)
                                           : Eigen::Vector3d::Zero();
    if (dir.z() == 0.0) continue;
    const double lambda = (sf.depth + shift.z() - centre.z()) / dir.z();
    if (!(lambda > 0.0)) continue;
    const Eigen::Vector3d p = centre + lambda * dir - shift;
    if (p.x() < sf.x_min || p.x() >= sf.x_max || p.y() < sf.y_min || p.y() >= sf.y_max) continue;
    if (best.surface < 0 || lambda < best.depth) {
      best.surface = static_cast<int>(s);
      best.depth = lambda;
    }
  }
  return best;
}

RenderedFrame render_frame(const Scene& scene, const Pose6& pose, const CameraIntrinsics& k,
                           double object_time) {
  k.validate();
  const int h = scene.spec.height;
  const int w = scene.spec.width;
  RenderedFrame f{Image(h, w, 3, 0.0), DepthMap(h, w, 0.0), SemanticLabelMap(h, w, scene.class_count),
                  InstanceLabelMap(h, w)};
  const Eigen::Matrix3d r = rotation_from_axis_angle(pose.r);
  const Eigen::Vector3d centre = -r.transpose() * pose.t;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Hit hit = cast_ray(scene, pose, k, x, y, object_time);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      f.depth.valid[i] = 0;
      if (hit.surface < 0) continue;
      const Surface& sf = scene.surfaces[hit.surface];
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      Eigen::Vector3d p = centre + hit.depth * (r.transpose() * ray);
      if (sf.moves) p -= object_time * scene.spec.object_motion;
      const auto rgb = scene.texture(hit.surface, p.x(), p.y());
      for (int c = 0; c < 3; ++c) f.image.at(y, x, c) = rgb[c];
      f.depth.depth[i] = hit.depth;
      f.depth.valid[i] = 1;
      f.labels.labels[i] = sf.label;
      f.instances.ids[i] = sf.instance;
    }
  }
  return f;
}

ScenePair make_pair(const Scene& scene, const Pose6& baseline, const CameraIntrinsics& k) {
  const RenderedFrame tgt = render_frame(scene, Pose6::identity(), k, 0.0);
  const RenderedFrame src = render_frame(scene, baseline, k, 1.0);
  const int h = scene.spec.height;
  const int w = scene.spec.width;

  ScenePair out;
  AlignmentProblem& p = out.problem;
  p.target = tgt.image;
  p.sources = {src.image};
  p.target_semantics = tgt.labels;
  p.source_semantics = {src.labels};
  p.intrinsics = k;

  GroundTruth& gt = out.truth;
  gt.depth = tgt.depth;
  gt.pose = baseline;
  gt.labels = tgt.labels;
  gt.instances = tgt.instances;
  gt.rigid_flow = FlowField(h, w);
  gt.flow = FlowField(h, w);
  gt.noc = Mask(h, w, 0);
  gt.moving = Mask(h, w, 0);
  gt.has_object_motion = scene.spec.kind == SceneKind::moving_object;
  if (gt.has_object_motion) gt.object_motion = scene.spec.object_motion;

  const Eigen::Matrix3d r = rotation_from_axis_angle(baseline.r);
  const auto project = [&](const Eigen::Vector3d& pw, double& u, double& v) {
    const Eigen::Vector3d pc = r * pw + baseline.t;
    if (!(pc.z() > 0.0)) return false;
    u = k.fx * pc.x() / pc.z() + k.cx;
    v = k.fy * pc.y() / pc.z() + k.cy;
    return true;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!tgt.depth.valid[i]) continue;
      const double z = tgt.depth.depth[i];
      const Eigen::Vector3d pw((x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z);
      const int surface = cast_ray(scene, Pose6::identity(), k, x, y, 0.0).surface;
      const bool moves = scene.surfaces[surface].moves;
      gt.moving[i] = moves ? 1 : 0;
      double u = 0.0;
      double v = 0.0;
      if (project(pw, u, v)) {
        gt.rigid_flow.u[i] = u - x;
        gt.rigid_flow.v[i] = v - y;
        gt.rigid_flow.valid[i] = 1;
      }
      const Eigen::Vector3d moved = moves ? Eigen::Vector3d(pw + scene.spec.object_motion) : pw;
      if (project(moved, u, v)) {
        gt.flow.u[i] = u - x;
        gt.flow.v[i] = v - y;
        gt.flow.valid[i] = 1;
        const bool inside = u >= 0.0 && u <= w - 1 && v >= 0.0 && v <= h - 1;
        gt.noc[i] = inside && cast_ray(scene, baseline, k, u, v, 1.0).surface == surface;
      }
    }
  }
  return out;
}

GradCheckProblem make_gradcheck_problem(std::uint64_t seed, const LossSelection& losses) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  spec.height = 16;
  spec.width = 16;
  spec.intrinsics = {20.0, 20.0, 7.5, 7.5};
  spec.background_depth = 4.0;
  spec.foreground_depth = 2.5;
  spec.foreground = {5, 4, 11, 10};
  spec.texture_seed = seed;
  spec.feature_px = 3.0;
  const Scene scene = build_scene(spec);

  Pose6 baseline;
  baseline.r = Eigen::Vector3d(0.01, -0.02, 0.005);
  baseline.t = Eigen::Vector3d(0.15, 0.03, 0.05);
  ScenePair pair = make_pair(scene, baseline, spec.intrinsics);

  GradCheckProblem out;
  out.problem = std::move(pair.problem);
  out.problem.config.pyramid_levels = 2;
  out.problem.losses = losses;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  InitOptions init;
  init.seed = seed;
  out.variables = initial_variables(out.problem, init);
  const DepthMap& d = pair.truth.depth;
  const std::vector<Image> depth_pyr =
      build_pyramid(Image(d.height(), d.width(), 1, d.depth.values()), out.problem.config.pyramid_levels);
  for (std::size_t l = 0; l < out.variables.log_depth.size(); ++l) {
    Raster<double>& z = out.variables.log_depth[l];
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::log(depth_pyr[l].data()[i]) + 0.05 * noise(rng);
  }
  Pose6& pose = out.variables.poses[0];
  pose = baseline;
  for (int a = 0; a < 3; ++a) {
    pose.r[a] += 0.005 * noise(rng);
    pose.t[a] += 0.02 * noise(rng);
  }
  return out;
}

}  // namespace semgeo
