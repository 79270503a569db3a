#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "semgeo/photometric.hpp"
#include "support.hpp"

using namespace semgeo;

namespace {

// SSIM at one pixel and channel from an explicitly enumerated 3x3 window
// with replicated borders.
double ssim_oracle(const Image& a, const Image& b, int y, int x, int c, double c1, double c2) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int yy = std::clamp(y + dy, 0, a.height() - 1);
      const int xx = std::clamp(x + dx, 0, a.width() - 1);
      const double va = a.at(yy, xx, c), vb = b.at(yy, xx, c);
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  const double ma = sa / 9, mb = sb / 9;
  const double va = saa / 9 - ma * ma, vb = sbb / 9 - mb * mb, cov = sab / 9 - ma * mb;
  return (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

// SSIM windows see the target wherever the reconstruction is invalid.
double loss_oracle(const Image& t, const Image& recon, const Mask& valid, double alpha) {
  Image r = recon;
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      if (valid(y, x)) continue;
      for (int c = 0; c < t.channels(); ++c) r.at(y, x, c) = t.at(y, x, c);
    }
  }
  double sum = 0;
  int n = 0;
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      if (!valid(y, x)) continue;
      double ssim = 0, l1 = 0;
      for (int c = 0; c < t.channels(); ++c) {
        ssim += ssim_oracle(t, r, y, x, c, 1e-4, 9e-4);
        l1 += std::abs(t.at(y, x, c) - r.at(y, x, c));
      }
      ssim /= t.channels();
      l1 /= t.channels();
      sum += alpha * (1 - ssim) / 2 + (1 - alpha) * l1;
      ++n;
    }
  }
  return sum / n;
}

}  // namespace

TEST(Ssim, MatchesWindowOracle) {
  std::mt19937_64 rng(21);
  const LossConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const Image a = gen::random_image(rng, 7, 9, 3);
    const Image b = gen::random_image(rng, 7, 9, 3);
    const Image s = ssim_map(a, b, cfg);
    ASSERT_EQ(s.channels(), 1);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) {
        double expected = 0;
        for (int c = 0; c < 3; ++c) expected += ssim_oracle(a, b, y, x, c, cfg.ssim_c1, cfg.ssim_c2);
        EXPECT_NEAR(s.at(y, x), expected / 3, 1e-13);
      }
    }
  }
}

TEST(Ssim, IdenticalAndZeroImagesScoreOne) {
  std::mt19937_64 rng(22);
  const Image a = gen::random_image(rng, 6, 6, 3);
  for (double v : ssim_map(a, a, {}).data()) EXPECT_NEAR(v, 1.0, 1e-15);
  const Image z(6, 6, 3, 0.0);
  for (double v : ssim_map(z, z, {}).data()) EXPECT_EQ(v, 1.0);
}

TEST(ReconstructionLoss, MatchesOracle) {
  std::mt19937_64 rng(23);
  for (double alpha : {0.0, 0.85, 1.0}) {
    LossConfig cfg;
    cfg.alpha = alpha;
    const Image t = gen::random_image(rng, 8, 8, 3);
    const Image r = gen::random_image(rng, 8, 8, 3);
    const Mask m = gen::random_mask(rng, 8, 8);
    EXPECT_NEAR(reconstruction_loss(t, r, m, cfg), loss_oracle(t, r, m, alpha), 1e-14);
  }
}

TEST(ReconstructionLoss, InvalidSamplesDoNotReachValidNeighbours) {
  std::mt19937_64 rng(26);
  const Image t = gen::random_image(rng, 8, 8, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = gen::random_mask(rng, 8, 8);
    Image a = gen::random_image(rng, 8, 8, 3);
    Image b = a;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i]) continue;
      for (int c = 0; c < 3; ++c) b.data()[i * 3 + c] = 0.0;
    }
    EXPECT_EQ(reconstruction_loss(t, a, m, {}), reconstruction_loss(t, b, m, {}));
  }
}

TEST(ReconstructionLoss, ZeroForPerfectReconstruction) {
  std::mt19937_64 rng(24);
  const Image t = gen::random_image(rng, 8, 8, 3);
  EXPECT_NEAR(reconstruction_loss(t, t, Mask(8, 8, 1), {}), 0.0, 1e-15);
}

TEST(ReconstructionLoss, EmptyMaskIsDegenerate) {
  const Image t(4, 4, 3, 0.5);
  EXPECT_THROW(reconstruction_loss(t, t, Mask(4, 4, 0), {}), DegenerateInputError);
  EXPECT_THROW(reconstruction_loss(t, Image(4, 5, 3), Mask(4, 4, 1), {}), DimensionError);
}

TEST(ReconstructionLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(25);
  const LossConfig cfg;
  const Image t = gen::random_image(rng, 8, 8, 3);
  Image r = gen::random_image(rng, 8, 8, 3);
  const Mask m = gen::random_mask(rng, 8, 8);
  Image g(8, 8, 3, 0.0);
  reconstruction_loss(t, r, m, cfg, &g, 2.0);
  const auto f = [&]() { return 2.0 * reconstruction_loss(t, r, m, cfg); };
  for (std::size_t i = 0; i < r.data().size(); ++i) {
    if (std::abs(r.data()[i] - t.data()[i]) < 1e-3) continue;
    const double fd = gen::central_difference(f, r.data()[i], 1e-6);
    EXPECT_NEAR(g.data()[i], fd, 1e-8 + 1e-5 * std::abs(fd));
  }
}

TEST(EdgeAwareSmoothness, MatchesForwardDifferenceOracle) {
  std::mt19937_64 rng(26);
  const DepthMap d = gen::random_depth(rng, 6, 7, 1.0, 3.0);
  const Image img = gen::random_image(rng, 6, 7, 3);
  double sum = 0;
  int n = 0;
  for (int y = 0; y + 1 < 6; ++y) {
    for (int x = 0; x + 1 < 7; ++x) {
      double gx = 0, gy = 0;
      for (int c = 0; c < 3; ++c) {
        gx += std::abs(img.at(y, x + 1, c) - img.at(y, x, c)) / 3;
        gy += std::abs(img.at(y + 1, x, c) - img.at(y, x, c)) / 3;
      }
      sum += std::abs(d.depth(y, x + 1) - d.depth(y, x)) * std::exp(-gx) +
             std::abs(d.depth(y + 1, x) - d.depth(y, x)) * std::exp(-gy);
      ++n;
    }
  }
  EXPECT_NEAR(edge_aware_smoothness(d, img), sum / n, 1e-14);
}

TEST(EdgeAwareSmoothness, ConstantDepthIsZeroAndGradientMatches) {
  const Image img(5, 5, 3, 0.3);
  EXPECT_EQ(edge_aware_smoothness(DepthMap(5, 5, 4.0), img), 0.0);

  std::mt19937_64 rng(27);
  DepthMap d = gen::random_depth(rng, 5, 6, 1.0, 3.0);
  const Image tex = gen::random_image(rng, 5, 6, 3);
  Raster<double> g(5, 6, 0.0);
  edge_aware_smoothness(d, tex, &g);
  const auto f = [&]() { return edge_aware_smoothness(d, tex); };
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    EXPECT_NEAR(g[i], gen::central_difference(f, d.depth[i], 1e-7), 1e-7);
  }
}

TEST(EdgeAwareSmoothness, RejectsTinyMaps) {
  EXPECT_THROW(edge_aware_smoothness(DepthMap(1, 5, 1.0), Image(1, 5, 3)), DimensionError);
}

TEST(PyramidObjective, IdentityWarpLeavesOnlySmoothness) {
  std::mt19937_64 rng(28);
  const Image t = gen::random_image(rng, 16, 16, 3);
  std::vector<Image> sources{t};
  LossConfig cfg;
  cfg.pyramid_levels = 3;
  std::vector<DepthMap> depth;
  for (int l = 0; l < 3; ++l) depth.push_back(gen::random_depth(rng, 16 >> l, 16 >> l, 1.0, 2.0));
  std::vector<Pose6> poses{Pose6::identity()};
  const ObjectiveBreakdown b = pyramid_objective(t, sources, depth, poses, {20, 20, 7.5, 7.5}, cfg);
  double total = 0;
  for (const auto& term : b.terms) {
    if (term.name.rfind("photo", 0) == 0) EXPECT_NEAR(term.value, 0.0, 1e-15) << term.name;
    total += term.weight * term.value;
  }
  EXPECT_NEAR(b.total, total, 1e-15);
  EXPECT_EQ(b.terms.size(), 6u);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.pyramid_levels = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.semantic_warp_weight = -1;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const Image a(4, 4, 3, 0.5), b(4, 4, 3, 0.6);
  // Zero variances cancel the contrast factor. Window variances come out as
  // E[x^2] - mu^2, which is zero only up to rounding.
  const double expected = (2 * 0.3 + 1e-4) / (0.25 + 0.36 + 1e-4);
  for (double v : ssim_map(a, b, {}).data()) EXPECT_NEAR(v, expected, 1e-12);
  EXPECT_NEAR(expected, 0.983609, 1e-6);

  LossConfig ssim_only;
  ssim_only.alpha = 1.0;
  EXPECT_NEAR(reconstruction_loss(a, b, Mask(4, 4, 1), ssim_only), (1 - expected) / 2, 1e-12);
  EXPECT_THROW(ssim_map(a, Image(4, 5, 3), {}), DimensionError);
}

TEST(ReconstructionLoss, PureL1Offset) {
  LossConfig l1;
  l1.alpha = 0.0;
  std::mt19937_64 rng(29);
  const Image t = gen::random_image(rng, 5, 5, 3);
  Image r = t;
  for (double& v : r.data()) v += 0.1;
  EXPECT_NEAR(reconstruction_loss(t, r, Mask(5, 5, 1), l1), 0.1, 1e-15);
}

TEST(EdgeAwareSmoothness, RampExamples) {
  DepthMap ramp(4, 5, 1.0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) ramp.depth(y, x) = 1.0 + 0.3 * x;
  }
  EXPECT_NEAR(edge_aware_smoothness(ramp, Image(4, 5, 3, 0.5)), 0.3, 1e-15);
  // Very strong horizontal image gradients switch the x-term off.
  Image stripes(4, 5, 3, 0.0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 5; ++x) {
      for (int c = 0; c < 3; ++c) stripes.at(y, x, c) = x % 2 ? 1e3 : 0.0;
    }
  }
  EXPECT_LT(edge_aware_smoothness(ramp, stripes), 1e-300);
}

TEST(PyramidObjective, SingleLevelIdentityIsZero) {
  std::mt19937_64 rng(30);
  const Image t = gen::random_image(rng, 8, 8, 3);
  LossConfig cfg;
  cfg.pyramid_levels = 1;
  const std::vector<Image> sources{t};
  const std::vector<DepthMap> depth{DepthMap(8, 8, 3.0)};
  const std::vector<Pose6> poses{Pose6::identity()};
  EXPECT_NEAR(pyramid_objective(t, sources, depth, poses, {10, 10, 3.5, 3.5}, cfg).total, 0.0, 1e-15);
  const std::vector<DepthMap> wrong{DepthMap(8, 7, 3.0)};
  EXPECT_THROW(pyramid_objective(t, sources, wrong, poses, {10, 10, 3.5, 3.5}, cfg), DimensionError);
}
