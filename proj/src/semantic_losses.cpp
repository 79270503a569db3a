#include "semgeo/semantic_losses.hpp"

#include <algorithm>
#include <cmath>

namespace semgeo {

namespace {

Image scale_channels(const Image& img, const Raster<double>& w) {
  Image out = img;
  const int ch = img.channels();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < ch; ++c) out.data()[i * ch + c] *= w[i];
  }
  return out;
}

Image scale_channels(const Image& img, const Image& membership, int k) {
  Image out = img;
  const int ch = img.channels();
  const int kc = membership.channels();
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double s = membership.data()[i * kc + k];
    for (int c = 0; c < ch; ++c) out.data()[i * ch + c] *= s;
  }
  return out;
}

// Sliding min/max of labels over a (2r+1) window along one axis.
void window_extrema_1d(const Raster<int>& in_min, const Raster<int>& in_max, int radius,
                       bool horizontal, Raster<int>& out_min, Raster<int>& out_max) {
  const int h = in_min.height();
  const int w = in_min.width();
  out_min = in_min;
  out_max = in_max;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int lo = in_min(y, x);
      int hi = in_max(y, x);
      if (horizontal) {
        for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
          lo = std::min(lo, in_min(y, xx));
          hi = std::max(hi, in_max(y, xx));
        }
      } else {
        for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
          lo = std::min(lo, in_min(yy, x));
          hi = std::max(hi, in_max(yy, x));
        }
      }
      out_min(y, x) = lo;
      out_max(y, x) = hi;
    }
  }
}

}  // namespace

double semantic_match_loss(const OneHotSemantic& warped, const Mask& valid,
                           const OneHotSemantic& s_tgt, Image* grad_warped, double grad_scale) {
  if (!warped.same_shape(s_tgt)) {
    throw DimensionError("semantic warp loss: class count or size mismatch");
  }
  if (!warped.same_size(valid.height(), valid.width())) {
    throw DimensionError("semantic warp loss: mask size mismatch");
  }
  const std::size_t count = count_set(valid);
  if (count == 0) throw DegenerateInputError("semantic warp loss: no valid pixels");
  const double inv_count = 1.0 / static_cast<double>(count);
  const int k = warped.channels();
  double sum = 0.0;
  for (std::size_t i = 0; i < warped.pixel_count(); ++i) {
    if (!valid[i]) continue;
    double sq = 0.0;
    for (int c = 0; c < k; ++c) {
      const double d = warped.data()[i * k + c] - s_tgt.data()[i * k + c];
      sq += d * d;
    }
    const double norm = std::sqrt(sq);
    sum += norm;
    if (grad_warped && norm > 0.0) {
      const double s = grad_scale * inv_count / norm;
      for (int c = 0; c < k; ++c) {
        grad_warped->data()[i * k + c] += s * (warped.data()[i * k + c] - s_tgt.data()[i * k + c]);
      }
    }
  }
  return sum * inv_count;
}

double semantic_warp_loss(const OneHotSemantic& s_src, const FlowField& flow,
                          const OneHotSemantic& s_tgt, WarpGradient* grad_flow,
                          double grad_scale) {
  if (!s_src.same_shape(s_tgt)) {
    throw DimensionError("semantic_warp_loss: class count or size mismatch");
  }
  const WarpResult warped = bilinear_warp(s_src, flow);
  Image g;
  if (grad_flow) g = Image(s_src.height(), s_src.width(), s_src.channels());
  const double loss =
      semantic_match_loss(warped.image, warped.valid, s_tgt, grad_flow ? &g : nullptr, grad_scale);
  if (grad_flow) {
    WarpGradient wg = bilinear_warp_backward(s_src, flow, g);
    if (grad_flow->u.size() != wg.u.size()) {
      *grad_flow = std::move(wg);
    } else {
      for (std::size_t i = 0; i < wg.u.size(); ++i) {
        grad_flow->u[i] += wg.u[i];
        grad_flow->v[i] += wg.v[i];
      }
    }
  }
  return loss;
}

double masked_reconstruction_loss(const Image& target, const Image& recon,
                                  const OneHotSemantic& s_tgt, const Mask& valid,
                                  const LossConfig& cfg, Image* grad_recon, double grad_scale) {
  if (!target.same_shape(recon) || !s_tgt.same_size(target.height(), target.width())) {
    throw DimensionError("masked_reconstruction_loss: shape mismatch");
  }
  if (count_set(valid) == 0) throw DegenerateInputError("masked_reconstruction_loss: no valid pixels");
  double total = 0.0;
  const int ch = recon.channels();
  for (int k = 0; k < s_tgt.channels(); ++k) {
    const Image jt = scale_channels(target, s_tgt, k);
    const Image js = scale_channels(recon, s_tgt, k);
    if (grad_recon) {
      Image g(recon.height(), recon.width(), ch);
      total += reconstruction_loss(jt, js, valid, cfg, &g, grad_scale);
      const int kc = s_tgt.channels();
      for (std::size_t i = 0; i < recon.pixel_count(); ++i) {
        const double s = s_tgt.data()[i * kc + k];
        for (int c = 0; c < ch; ++c) grad_recon->data()[i * ch + c] += s * g.data()[i * ch + c];
      }
    } else {
      total += reconstruction_loss(jt, js, valid, cfg);
    }
  }
  return total;
}

BoundaryWeights boundary_weights(const SemanticLabelMap& s_tgt, int radius) {
  if (radius < 0) throw ArgumentError("boundary_weights: radius must be >= 0");
  const int h = s_tgt.height();
  const int w = s_tgt.width();
  BoundaryWeights out(h, w, 1.0);
  // Boundary pixels are those with a differing 8-neighbour; `radius` dilates
  // that band, so the search window has Chebyshev radius radius + 1.
  const int window = radius + 1;
  Raster<int> mn, mx, mn2, mx2;
  window_extrema_1d(s_tgt.labels, s_tgt.labels, window, true, mn, mx);
  window_extrema_1d(mn, mx, window, false, mn2, mx2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = s_tgt.labels(y, x);
      out(y, x) = (mn2(y, x) != l || mx2(y, x) != l) ? 0.0 : 1.0;
    }
  }
  return out;
}

double boundary_weighted_loss(const Image& target, const Image& recon, const BoundaryWeights& m,
                              const Mask& valid, const LossConfig& cfg, Image* grad_recon,
                              double grad_scale) {
  if (!target.same_shape(recon) || !target.same_size(m.height(), m.width())) {
    throw DimensionError("boundary_weighted_loss: shape mismatch");
  }
  const Image a = scale_channels(target, m);
  const Image b = scale_channels(recon, m);
  if (!grad_recon) return reconstruction_loss(a, b, valid, cfg);
  Image g(recon.height(), recon.width(), recon.channels());
  const double loss = reconstruction_loss(a, b, valid, cfg, &g, grad_scale);
  const int ch = recon.channels();
  for (std::size_t i = 0; i < recon.pixel_count(); ++i) {
    for (int c = 0; c < ch; ++c) grad_recon->data()[i * ch + c] += m[i] * g.data()[i * ch + c];
  }
  return loss;
}

}  // namespace semgeo
