#include <gtest/gtest.h>

#include <cmath>

#include "semgeo/synth.hpp"
#include "support.hpp"

using namespace semgeo;

namespace {

Pose6 translation(double tx, double ty = 0.0, double tz = 0.0) { return {{0, 0, 0}, {tx, ty, tz}}; }

double intensity_std(const Image& img) {
  double s = 0, ss = 0;
  for (double v : img.data()) {
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(img.data().size());
  return std::sqrt(ss / n - (s / n) * (s / n));
}

}  // namespace

TEST(Synth, PlaneHasConstantDepthAndOneClass) {
  const SceneSpec spec;
  const RenderedFrame f = render_frame(build_scene(spec), Pose6::identity(), spec.intrinsics);
  for (std::size_t i = 0; i < f.depth.depth.size(); ++i) {
    EXPECT_NEAR(f.depth.depth[i], 10.0, 1e-12);
    EXPECT_EQ(f.depth.valid[i], 1);
    EXPECT_EQ(f.labels.labels[i], 0);
  }
  for (double v : f.image.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Synth, TwoPlaneLabelsFollowTheRectangle) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  const RenderedFrame f = render_frame(build_scene(spec), Pose6::identity(), spec.intrinsics);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const bool fg = spec.foreground.contains(x, y);
      EXPECT_EQ(f.labels.labels(y, x), fg ? 1 : 0);
      EXPECT_EQ(f.instances.ids(y, x), fg ? 1 : 0);
      EXPECT_NEAR(f.depth.depth(y, x), fg ? 7.0 : 10.0, 1e-12);
    }
  }
}

TEST(Synth, RenderingIsDeterministicAndSeeded) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  const Scene s = build_scene(spec);
  EXPECT_EQ(render_frame(s, translation(0.3), spec.intrinsics).image,
            render_frame(s, translation(0.3), spec.intrinsics).image);
  SceneSpec other = spec;
  other.texture_seed = 2;
  EXPECT_NE(render_frame(build_scene(other), Pose6::identity(), spec.intrinsics).image,
            render_frame(s, Pose6::identity(), spec.intrinsics).image);
}

TEST(Synth, LateralTranslationGivesFiveInPixelFlow) {
  const SceneSpec spec;
  const ScenePair pair = make_pair(build_scene(spec), translation(0.5), spec.intrinsics);
  for (std::size_t i = 0; i < pair.truth.rigid_flow.u.size(); ++i) {
    EXPECT_NEAR(pair.truth.rigid_flow.u[i], 5.0, 1e-12);
    EXPECT_NEAR(pair.truth.rigid_flow.v[i], 0.0, 1e-12);
  }
  EXPECT_FALSE(pair.truth.has_object_motion);
  EXPECT_EQ(pair.truth.flow, pair.truth.rigid_flow);
}

TEST(Synth, GroundTruthFlowWarpsSourceOntoTarget) {
  for (SceneKind kind : {SceneKind::plane, SceneKind::two_plane}) {
    SceneSpec spec;
    spec.kind = kind;
    const Pose6 baseline{{0.01, -0.02, 0.005}, {0.4, 0.05, 0.1}};
    const ScenePair pair = make_pair(build_scene(spec), baseline, spec.intrinsics);
    const WarpResult w = bilinear_warp(pair.problem.sources[0], pair.truth.flow);
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < pair.truth.noc.size(); ++i) {
      if (!pair.truth.noc[i] || !w.valid[i]) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(w.image.data()[i * 3 + c] - pair.problem.target.data()[i * 3 + c]);
      n += 3;
    }
    ASSERT_GT(n, 0);
    EXPECT_LT(sum / n, 0.02) << scene_kind_name(kind);
  }
}

TEST(Synth, FlowMatchesRigidFlowOfTrueDepth) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  const Pose6 baseline{{0.02, 0.01, -0.01}, {0.3, -0.1, 0.2}};
  const ScenePair pair = make_pair(build_scene(spec), baseline, spec.intrinsics);
  const FlowField f = rigid_flow(pair.truth.depth, baseline, spec.intrinsics);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    EXPECT_NEAR(f.u[i], pair.truth.rigid_flow.u[i], 1e-9);
    EXPECT_NEAR(f.v[i], pair.truth.rigid_flow.v[i], 1e-9);
  }
}

TEST(Synth, OcclusionIsMarkedBesideTheForeground) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  const ScenePair pair = make_pair(build_scene(spec), translation(0.5), spec.intrinsics);
  // Background flow is 5 px, foreground 50/7 px. The background strip just
  // right of the rectangle lands behind the foreground in the source.
  EXPECT_EQ(pair.truth.noc(32, 45), 0);
  EXPECT_EQ(pair.truth.noc(32, 18), 1);
  EXPECT_EQ(pair.truth.noc(32, 48), 1);
  EXPECT_EQ(pair.truth.noc(32, 30), 1);
  // The right edge maps outside the source image.
  EXPECT_EQ(pair.truth.noc(32, 62), 0);
}

TEST(Synth, ContrastControlsTextureStrength) {
  double last = -1.0;
  for (double c : {0.0, 0.2, 0.5, 0.9}) {
    SceneSpec spec;
    spec.contrast = c;
    const double sd = intensity_std(render_frame(build_scene(spec), Pose6::identity(), spec.intrinsics).image);
    if (c == 0.0) EXPECT_NEAR(sd, 0.0, 1e-12);
    EXPECT_GT(sd, last);
    last = sd;
  }
}

TEST(Synth, MovingObjectMetadata) {
  SceneSpec spec;
  spec.kind = SceneKind::moving_object;
  const ScenePair pair = make_pair(build_scene(spec), translation(0.5), spec.intrinsics);
  EXPECT_TRUE(pair.truth.has_object_motion);
  EXPECT_EQ(pair.truth.object_motion, spec.object_motion);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
      const bool fg = spec.foreground.contains(x, y);
      EXPECT_EQ(pair.truth.moving[i], fg ? 1 : 0);
      if (fg) {
        // 0.2 m of extra motion at 7 m.
        EXPECT_NEAR(pair.truth.flow.u[i] - pair.truth.rigid_flow.u[i], 100.0 * 0.2 / 7.0, 1e-9);
      } else {
        EXPECT_EQ(pair.truth.flow.u[i], pair.truth.rigid_flow.u[i]);
      }
    }
  }
}

TEST(Synth, ZeroBaselineReproducesTheTarget) {
  for (SceneKind kind : {SceneKind::plane, SceneKind::two_plane}) {
    SceneSpec spec;
    spec.kind = kind;
    const ScenePair pair = make_pair(build_scene(spec), Pose6::identity(), spec.intrinsics);
    EXPECT_EQ(pair.problem.sources[0], pair.problem.target);
    // The ray-cast ground truth carries rounding; the optimiser's flow does not.
    for (double v : pair.truth.flow.u.values()) EXPECT_NEAR(v, 0.0, 1e-12);
    const FlowField f = rigid_flow(pair.truth.depth, Pose6::identity(), spec.intrinsics);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
      EXPECT_EQ(f.u[i], 0.0);
      EXPECT_EQ(f.v[i], 0.0);
    }
  }
}

TEST(Synth, ProblemCarriesNoGroundTruthGeometry) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  const ScenePair pair = make_pair(build_scene(spec), translation(0.5), spec.intrinsics);
  EXPECT_NO_THROW(pair.problem.validate());
  EXPECT_EQ(pair.problem.sources.size(), 1u);
  EXPECT_EQ(pair.problem.target_semantics, pair.truth.labels);
}

TEST(Synth, SpecValidation) {
  SceneSpec spec;
  spec.kind = SceneKind::two_plane;
  spec.foreground_depth = 12.0;
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = {};
  spec.background_depth = 100.0;
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = {};
  spec.kind = SceneKind::two_plane;
  spec.foreground = {50, 20, 70, 30};
  EXPECT_THROW(spec.validate(), ArgumentError);
  EXPECT_THROW(parse_scene_kind("cube"), ArgumentError);
  EXPECT_EQ(parse_scene_kind(scene_kind_name(SceneKind::moving_object)), SceneKind::moving_object);
}

TEST(Synth, GradCheckProblemIsSeeded) {
  const LossSelection l = LossSelection::parse("photo,smooth");
  const GradCheckProblem a = make_gradcheck_problem(4, l);
  const GradCheckProblem b = make_gradcheck_problem(4, l);
  const GradCheckProblem c = make_gradcheck_problem(5, l);
  EXPECT_EQ(a.variables.flatten(), b.variables.flatten());
  EXPECT_NE(a.variables.flatten(), c.variables.flatten());
  EXPECT_EQ(a.problem.target.height(), 16);
  EXPECT_EQ(a.problem.config.pyramid_levels, 2);
}
