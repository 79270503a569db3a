#include "semgeo/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace semgeo {

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
  if (pyramid_levels < 1) throw ArgumentError("pyramid_levels must be at least 1");
  if (!(ssim_c1 >= 0.0 && ssim_c2 >= 0.0)) throw ArgumentError("SSIM constants must be >= 0");
  if (!(smoothness_weight >= 0.0)) throw ArgumentError("smoothness_weight must be >= 0");
  if (!(semantic_warp_weight >= 0.0 && masked_weight >= 0.0 && boundary_weight >= 0.0 &&
        transfer_weight >= 0.0)) {
    throw ArgumentError("loss weights must be >= 0");
  }
  if (boundary_radius < 0) throw ArgumentError("boundary_radius must be >= 0");
}

namespace {

// 3x3 mean with replicated borders over a single-channel plane.
void box3(const std::vector<double>& f, int h, int w, std::vector<double>& out) {
  std::vector<double> rows(f.size());
  for (int y = 0; y < h; ++y) {
    const double* r = &f[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      rows[static_cast<std::size_t>(y) * w + x] = r[xl] + r[x] + r[xr];
    }
  }
  out.assign(f.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const int yu = std::max(y - 1, 0);
    const int yd = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      out[static_cast<std::size_t>(y) * w + x] =
          (rows[static_cast<std::size_t>(yu) * w + x] + rows[static_cast<std::size_t>(y) * w + x] +
           rows[static_cast<std::size_t>(yd) * w + x]) /
          9.0;
    }
  }
}

// Transpose of box3: scatters g(p) / 9 onto every (clamped) tap of p's window.
void box3_transpose(const std::vector<double>& g, int h, int w, std::vector<double>& out) {
  std::vector<double> cols(g.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const int yu = std::max(y - 1, 0);
    const int yd = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const double v = g[static_cast<std::size_t>(y) * w + x] / 9.0;
      cols[static_cast<std::size_t>(yu) * w + x] += v;
      cols[static_cast<std::size_t>(y) * w + x] += v;
      cols[static_cast<std::size_t>(yd) * w + x] += v;
    }
  }
  out.assign(g.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = cols[static_cast<std::size_t>(y) * w + x];
      const std::size_t row = static_cast<std::size_t>(y) * w;
      out[row + std::max(x - 1, 0)] += v;
      out[row + x] += v;
      out[row + std::min(x + 1, w - 1)] += v;
    }
  }
}

struct WindowStats {
  std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

WindowStats window_stats(const Image& a, const Image& b, int c) {
  const int h = a.height();
  const int w = a.width();
  const std::size_t n = a.pixel_count();
  const int ch = a.channels();
  std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    pa[i] = a.data()[i * ch + c];
    pb[i] = b.data()[i * ch + c];
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }
  WindowStats s;
  box3(pa, h, w, s.mu_a);
  box3(pb, h, w, s.mu_b);
  box3(aa, h, w, s.e_aa);
  box3(bb, h, w, s.e_bb);
  box3(ab, h, w, s.e_ab);
  return s;
}

void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": image shapes differ");
}

void check_mask(const Image& img, const Mask& m, const char* what) {
  if (!img.same_size(m.height(), m.width())) {
    throw DimensionError(std::string(what) + ": mask size differs from image");
  }
}

}  // namespace

Image ssim_map(const Image& a, const Image& b, const LossConfig& cfg) {
  check_same_shape(a, b, "ssim_map");
  const std::size_t n = a.pixel_count();
  const int ch = a.channels();
  Image out(a.height(), a.width(), 1, 0.0);
  const double c1 = cfg.ssim_c1;
  const double c2 = cfg.ssim_c2;
  for (int c = 0; c < ch; ++c) {
    const WindowStats s = window_stats(a, b, c);
    for (std::size_t i = 0; i < n; ++i) {
      const double ma = s.mu_a[i];
      const double mb = s.mu_b[i];
      const double va = s.e_aa[i] - ma * ma;
      const double vb = s.e_bb[i] - mb * mb;
      const double cov = s.e_ab[i] - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      out.data()[i] += num / den;
    }
  }
  if (ch > 1) {
    for (auto& v : out.data()) v /= ch;
  }
  return out;
}

void ssim_map_backward(const Image& a, const Image& b, const LossConfig& cfg,
                       const Raster<double>& upstream, Image* grad_a, Image* grad_b) {
  check_same_shape(a, b, "ssim_map_backward");
  if (!a.same_size(upstream.height(), upstream.width())) {
    throw DimensionError("ssim_map_backward: upstream size differs");
  }
  if (grad_a) check_same_shape(a, *grad_a, "ssim_map_backward");
  if (grad_b) check_same_shape(b, *grad_b, "ssim_map_backward");
  const int h = a.height();
  const int w = a.width();
  const std::size_t n = a.pixel_count();
  const int ch = a.channels();
  const double c1 = cfg.ssim_c1;
  const double c2 = cfg.ssim_c2;

  std::vector<double> g_ma(n), g_mb(n), g_eaa(n), g_ebb(n), g_eab(n);
  std::vector<double> t_ma, t_mb, t_eaa, t_ebb, t_eab;
  for (int c = 0; c < ch; ++c) {
    const WindowStats s = window_stats(a, b, c);
    for (std::size_t i = 0; i < n; ++i) {
      const double up = upstream[i] / ch;
      const double ma = s.mu_a[i];
      const double mb = s.mu_b[i];
      const double A1 = 2.0 * ma * mb + c1;
      const double A2 = 2.0 * (s.e_ab[i] - ma * mb) + c2;
      const double B1 = ma * ma + mb * mb + c1;
      const double B2 = (s.e_aa[i] - ma * ma) + (s.e_bb[i] - mb * mb) + c2;
      const double dA1 = up * A2 / (B1 * B2);
      const double dA2 = up * A1 / (B1 * B2);
      const double dB1 = -up * A1 * A2 / (B1 * B1 * B2);
      const double dB2 = -up * A1 * A2 / (B1 * B2 * B2);
      g_ma[i] = dA1 * 2.0 * mb - dA2 * 2.0 * mb + dB1 * 2.0 * ma - dB2 * 2.0 * ma;
      g_mb[i] = dA1 * 2.0 * ma - dA2 * 2.0 * ma + dB1 * 2.0 * mb - dB2 * 2.0 * mb;
      g_eaa[i] = dB2;
      g_ebb[i] = dB2;
      g_eab[i] = 2.0 * dA2;
    }
    box3_transpose(g_ma, h, w, t_ma);
    box3_transpose(g_mb, h, w, t_mb);
    box3_transpose(g_eaa, h, w, t_eaa);
    box3_transpose(g_ebb, h, w, t_ebb);
    box3_transpose(g_eab, h, w, t_eab);
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.data()[i * ch + c];
      const double vb = b.data()[i * ch + c];
      if (grad_a) grad_a->data()[i * ch + c] += t_ma[i] + 2.0 * va * t_eaa[i] + vb * t_eab[i];
      if (grad_b) grad_b->data()[i * ch + c] += t_mb[i] + 2.0 * vb * t_ebb[i] + va * t_eab[i];
    }
  }
}

double reconstruction_loss(const Image& target, const Image& recon, const Mask& valid,
                           const LossConfig& cfg, Image* grad_recon, double grad_scale) {
  check_same_shape(target, recon, "reconstruction_loss");
  check_mask(target, valid, "reconstruction_loss");
  if (grad_recon) check_same_shape(recon, *grad_recon, "reconstruction_loss");
  const std::size_t count = count_set(valid);
  if (count == 0) throw DegenerateInputError("reconstruction_loss: no valid pixels");
  const double alpha = cfg.alpha;
  const int ch = target.channels();
  const std::size_t n = target.pixel_count();
  const double inv_count = 1.0 / static_cast<double>(count);

  // Invalid samples carry a zero fill. Inside the SSIM windows of valid
  // neighbours they are replaced by the target so that a pixel leaving the
  // view does not perturb the loss elsewhere. The fill is constant in the
  // variables, hence no gradient reaches those pixels.
  const bool fill = alpha > 0.0 && count < n;
  Image filled;
  if (fill) {
    filled = recon;
    for (std::size_t i = 0; i < n; ++i) {
      if (valid[i]) continue;
      for (int c = 0; c < ch; ++c) filled.data()[i * ch + c] = target.data()[i * ch + c];
    }
  }
  const Image& ssim_recon = fill ? filled : recon;
  Image ssim;
  if (alpha > 0.0) ssim = ssim_map(target, ssim_recon, cfg);

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    double l1 = 0.0;
    for (int c = 0; c < ch; ++c) l1 += std::abs(target.data()[i * ch + c] - recon.data()[i * ch + c]);
    double term = (1.0 - alpha) * l1 / ch;
    if (alpha > 0.0) term += alpha * (1.0 - ssim.data()[i]) * 0.5;
    sum += term;
  }

  if (grad_recon) {
    const double l1_scale = grad_scale * (1.0 - alpha) * inv_count / ch;
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid[i]) continue;
      for (int c = 0; c < ch; ++c) {
        const double diff = recon.data()[i * ch + c] - target.data()[i * ch + c];
        const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        grad_recon->data()[i * ch + c] += l1_scale * sgn;
      }
    }
    if (alpha > 0.0) {
      Raster<double> up(target.height(), target.width(), 0.0);
      const double s = -grad_scale * alpha * 0.5 * inv_count;
      for (std::size_t i = 0; i < n; ++i) {
        if (valid[i]) up[i] = s;
      }
      if (!fill) {
        ssim_map_backward(target, recon, cfg, up, nullptr, grad_recon);
      } else {
        Image g(recon.height(), recon.width(), ch, 0.0);
        ssim_map_backward(target, ssim_recon, cfg, up, nullptr, &g);
        for (std::size_t i = 0; i < n; ++i) {
          if (!valid[i]) continue;
          for (int c = 0; c < ch; ++c) grad_recon->data()[i * ch + c] += g.data()[i * ch + c];
        }
      }
    }
  }
  return sum * inv_count;
}

double edge_aware_smoothness(const DepthMap& d, const Image& img, Raster<double>* grad_depth,
                             double grad_scale) {
  const int h = d.height();
  const int w = d.width();
  if (!img.same_size(h, w)) throw DimensionError("edge_aware_smoothness: image/depth size differ");
  if (h < 2 || w < 2) throw DimensionError("edge_aware_smoothness: needs at least 2x2 pixels");
  if (grad_depth && (grad_depth->height() != h || grad_depth->width() != w)) {
    throw DimensionError("edge_aware_smoothness: gradient buffer size");
  }
  const int ch = img.channels();
  auto image_grad = [&](int y0, int x0, int y1, int x1) {
    double g = 0.0;
    for (int c = 0; c < ch; ++c) g += std::abs(img.at(y1, x1, c) - img.at(y0, x0, c));
    return g / ch;
  };

  std::size_t count = 0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      if (d.valid(y, x) && d.valid(y, x + 1) && d.valid(y + 1, x)) ++count;
    }
  }
  if (count == 0) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(count);

  double sum = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      if (!(d.valid(y, x) && d.valid(y, x + 1) && d.valid(y + 1, x))) continue;
      const double dx = d.depth(y, x + 1) - d.depth(y, x);
      const double dy = d.depth(y + 1, x) - d.depth(y, x);
      const double wx = std::exp(-image_grad(y, x, y, x + 1));
      const double wy = std::exp(-image_grad(y, x, y + 1, x));
      sum += std::abs(dx) * wx + std::abs(dy) * wy;
      if (grad_depth) {
        const double gx = grad_scale * inv_count * wx * (dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0));
        const double gy = grad_scale * inv_count * wy * (dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0));
        (*grad_depth)(y, x + 1) += gx;
        (*grad_depth)(y + 1, x) += gy;
        (*grad_depth)(y, x) -= gx + gy;
      }
    }
  }
  return sum * inv_count;
}

std::vector<Image> build_pyramid(const Image& img, int levels) {
  if (levels < 1) throw ArgumentError("pyramid needs at least one level");
  std::vector<Image> out;
  out.reserve(levels);
  out.push_back(img);
  for (int l = 1; l < levels; ++l) out.push_back(downsample_half(out.back()));
  return out;
}

ObjectiveBreakdown pyramid_objective(const Image& target, std::span<const Image> sources,
                                     std::span<const DepthMap> depth_pyramid,
                                     std::span<const Pose6> poses, const CameraIntrinsics& k,
                                     const LossConfig& cfg) {
  cfg.validate();
  const int levels = cfg.pyramid_levels;
  if (static_cast<int>(depth_pyramid.size()) != levels) {
    throw DimensionError("pyramid_objective: depth pyramid has the wrong number of levels");
  }
  if (sources.size() != poses.size() || sources.empty()) {
    throw DimensionError("pyramid_objective: need one pose per source frame");
  }
  for (const auto& s : sources) check_same_shape(target, s, "pyramid_objective");

  const std::vector<Image> tgt = build_pyramid(target, levels);
  std::vector<std::vector<Image>> src;
  for (const auto& s : sources) src.push_back(build_pyramid(s, levels));

  ObjectiveBreakdown out;
  for (int l = 0; l < levels; ++l) {
    const DepthMap& d = depth_pyramid[l];
    if (!tgt[l].same_size(d.height(), d.width())) {
      throw DimensionError("pyramid_objective: depth level " + std::to_string(l) +
                           " does not match the image pyramid");
    }
    const CameraIntrinsics kl = k.at_level(l);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const FlowField flow = rigid_flow(d, poses[s], kl);
      const WarpResult warped = bilinear_warp(src[s][l], flow);
      const double v = reconstruction_loss(tgt[l], warped.image, warped.valid, cfg);
      out.terms.push_back({"photo/l" + std::to_string(l) + "/s" + std::to_string(s), v, 1.0});
    }
    const double sm = edge_aware_smoothness(d, tgt[l]);
    out.terms.push_back(
        {"smooth/l" + std::to_string(l), sm, cfg.smoothness_weight / static_cast<double>(1 << l)});
  }
  for (const auto& t : out.terms) out.total += t.weight * t.value;
  return out;
}

}  // namespace semgeo
