#pragma once

// Losses that use semantic segmentation to guide reconstruction:
// semantic warping, per-class masked reconstruction and class-boundary
// weighted reconstruction.

#include "semgeo/core.hpp"
#include "semgeo/geometry.hpp"
#include "semgeo/photometric.hpp"

namespace semgeo {

/// K-channel class-membership field. Hard labels give exact one-hot vectors;
/// warping or pooling produces soft memberships that still sum to one.
using OneHotSemantic = Image;

/// Per-pixel weights in [0, 1]: 0 near class boundaries, 1 elsewhere.
using BoundaryWeights = Raster<double>;

/// Mean over valid pixels of || warped(p) - target(p) ||_2 over the K channels.
/// `grad_warped` (optional) receives grad_scale * dL/d(warped). The norm's
/// derivative is taken as zero where the difference vanishes.
double semantic_match_loss(const OneHotSemantic& warped, const Mask& valid,
                           const OneHotSemantic& s_tgt, Image* grad_warped = nullptr,
                           double grad_scale = 1.0);

/// Warps the source semantics with `flow` and compares them to the target
/// semantics. `grad_flow` (optional) receives grad_scale * dL/d(flow).
double semantic_warp_loss(const OneHotSemantic& s_src, const FlowField& flow,
                          const OneHotSemantic& s_tgt, WarpGradient* grad_flow = nullptr,
                          double grad_scale = 1.0);

/// Sum over classes k of the reconstruction loss between target * S_k and
/// recon * S_k, S_k being the target's k-th membership channel.
double masked_reconstruction_loss(const Image& target, const Image& recon,
                                  const OneHotSemantic& s_tgt, const Mask& valid,
                                  const LossConfig& cfg, Image* grad_recon = nullptr,
                                  double grad_scale = 1.0);

/// w(p) = 0 on the class-boundary band, 1 elsewhere. Radius 0 zeroes exactly
/// the pixels with a differently labelled 8-neighbour; each extra unit of
/// radius dilates the band by one pixel (Chebyshev distance radius + 1).
BoundaryWeights boundary_weights(const SemanticLabelMap& s_tgt, int radius);

/// Reconstruction loss evaluated on target * M and recon * M.
double boundary_weighted_loss(const Image& target, const Image& recon, const BoundaryWeights& m,
                              const Mask& valid, const LossConfig& cfg,
                              Image* grad_recon = nullptr, double grad_scale = 1.0);

}  // namespace semgeo
