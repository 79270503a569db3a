#pragma once

// Appearance losses: windowed SSIM, the SSIM + L1 reconstruction loss,
// edge-aware depth smoothness and their multi-scale sum.
//
// Every loss takes an optional gradient sink. Gradients are *accumulated*
// into the sink after multiplication by `grad_scale`, so weighted sums of
// terms can share one buffer.

#include <span>
#include <string>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/geometry.hpp"

namespace semgeo {

struct LossConfig {
  /// SSIM share of the reconstruction loss.
  double alpha = 0.85;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;
  int pyramid_levels = 4;
  /// Full-resolution smoothness weight; halved at each coarser level.
  double smoothness_weight = 0.5;
  double semantic_warp_weight = 0.2;
  double masked_weight = 1.0;
  double boundary_weight = 1.0;
  double transfer_weight = 0.1;
  /// Chebyshev radius used to build the class-boundary weight matrix.
  int boundary_radius = 1;

  void validate() const;
};

/// Per-pixel SSIM over a 3x3 mean window with edge replication, computed per
/// channel and averaged across channels. Output has one channel.
Image ssim_map(const Image& a, const Image& b, const LossConfig& cfg);

/// Adjoint of ssim_map: `upstream` is dL/d(ssim) per pixel.
void ssim_map_backward(const Image& a, const Image& b, const LossConfig& cfg,
                       const Raster<double>& upstream, Image* grad_a, Image* grad_b);

/// Mean over valid pixels of alpha * (1 - SSIM) / 2 + (1 - alpha) * |target - recon|,
/// with the L1 part averaged over channels. Empty mask throws DegenerateInputError.
double reconstruction_loss(const Image& target, const Image& recon, const Mask& valid,
                           const LossConfig& cfg, Image* grad_recon = nullptr,
                           double grad_scale = 1.0);

/// Mean over interior pixels of |dD/dx| exp(-|dI/dx|) + |dD/dy| exp(-|dI/dy|)
/// using forward differences. A pixel contributes when it and its right and
/// lower neighbours have valid depth.
double edge_aware_smoothness(const DepthMap& d, const Image& img,
                             Raster<double>* grad_depth = nullptr, double grad_scale = 1.0);

struct TermValue {
  std::string name;
  double value = 0.0;
  double weight = 1.0;
};

struct ObjectiveBreakdown {
  double total = 0.0;
  std::vector<TermValue> terms;
};

/// Sum over pyramid levels (and source frames) of the reconstruction loss plus
/// weighted smoothness. Level l uses sources/target downsampled l times,
/// depth_pyramid[l] and intrinsics.at_level(l). Term names are
/// "photo/l<level>/s<source>" and "smooth/l<level>".
ObjectiveBreakdown pyramid_objective(const Image& target, std::span<const Image> sources,
                                     std::span<const DepthMap> depth_pyramid,
                                     std::span<const Pose6> poses, const CameraIntrinsics& k,
                                     const LossConfig& cfg);

/// The image and its successive 2x2 mean-pooled reductions, `levels` entries.
std::vector<Image> build_pyramid(const Image& img, int levels);

}  // namespace semgeo
