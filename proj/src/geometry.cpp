#include "semgeo/geometry.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace semgeo {

namespace {

constexpr double kExpSeriesThreshold = 1e-8;
constexpr double kJacobianSeriesThreshold = 1e-3;

bool all_finite(const Pose6& p) { return p.r.allFinite() && p.t.allFinite(); }

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy))) {
    throw ArgumentError("camera intrinsics must be finite");
  }
  if (!(fx > 0.0 && fy > 0.0)) throw ArgumentError("focal lengths must be positive");
}

CameraIntrinsics CameraIntrinsics::at_level(int level) const {
  CameraIntrinsics k = *this;
  for (int i = 0; i < level; ++i) {
    k.fx *= 0.5;
    k.fy *= 0.5;
    k.cx = (k.cx + 0.5) * 0.5 - 0.5;
    k.cy = (k.cy + 0.5) * 0.5 - 0.5;
  }
  return k;
}

Eigen::Matrix<double, 6, 1> Pose6::as_vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << r, t;
  return v;
}

Pose6 Pose6::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  Pose6 p;
  p.r = v.head<3>();
  p.t = v.tail<3>();
  return p;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  const Eigen::Matrix3d K = skew(r);
  if (theta < kExpSeriesThreshold) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  const Eigen::Matrix3d K = skew(r);
  double b;
  double c;
  if (theta < kJacobianSeriesThreshold) {
    const double t2 = theta * theta;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    b = (1.0 - std::cos(theta)) / (theta * theta);
    c = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  return Eigen::Matrix3d::Identity() + b * K + c * K * K;
}

Transform pose_to_transform(const Pose6& p) {
  if (!all_finite(p)) throw ArgumentError("pose_to_transform: non-finite pose");
  Transform T = Transform::Identity();
  T.topLeftCorner<3, 3>() = rotation_from_axis_angle(p.r);
  T.topRightCorner<3, 1>() = p.t;
  return T;
}

Transform transform_inverse(const Transform& T) {
  Transform inv = Transform::Identity();
  const Eigen::Matrix3d Rt = T.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = Rt;
  inv.topRightCorner<3, 1>() = -Rt * T.topRightCorner<3, 1>();
  return inv;
}

PointField backproject(const DepthMap& d, const CameraIntrinsics& k) {
  k.validate();
  const int h = d.height();
  const int w = d.width();
  PointField out{Raster<Eigen::Vector3d>(h, w, Eigen::Vector3d::Zero()), d.valid};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!d.valid(y, x)) continue;
      const double z = d.depth(y, x);
      out.xyz(y, x) = Eigen::Vector3d((x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z);
    }
  }
  return out;
}

// Works in inverse depth: q = R * ray + rho * t with ray = ((x-cx)/fx, (y-cy)/fy, 1)
// and rho = 1/Z. q is the transformed point divided by Z, so projections of q
// equal projections of the point, and a zero translation makes the flow
// independent of depth bit for bit.
RigidFlowJacobian rigid_flow_jacobian(const DepthMap& d, const Pose6& p,
                                      const CameraIntrinsics& k) {
  k.validate();
  if (!all_finite(p)) throw ArgumentError("rigid_flow: non-finite pose");
  const int h = d.height();
  const int w = d.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const Eigen::Matrix3d R = rotation_from_axis_angle(p.r);
  const Eigen::Matrix3d Jl = so3_left_jacobian(p.r);

  RigidFlowJacobian out;
  out.flow = FlowField(h, w);
  out.d_inverse_depth.assign(n, Eigen::Vector2d::Zero());
  out.d_pose.assign(n, Eigen::Matrix<double, 2, 6>::Zero());

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!d.valid[i]) {
        out.flow.valid[i] = 0;
        continue;
      }
      const double rho = 1.0 / d.depth[i];
      const Eigen::Vector3d ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d Rray = R * ray;
      const Eigen::Vector3d q = Rray + rho * p.t;
      if (!(q.z() > 0.0)) {
        out.flow.valid[i] = 0;
        continue;
      }
      const double iz = 1.0 / q.z();
      // Differencing against the ray (not the pixel) keeps the identity pose
      // at exactly zero flow.
      out.flow.u[i] = k.fx * (q.x() * iz - ray.x());
      out.flow.v[i] = k.fy * (q.y() * iz - ray.y());

      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * q.x() * iz * iz,
               0.0, k.fy * iz, -k.fy * q.y() * iz * iz;
      out.d_inverse_depth[i] = dproj * p.t;
      out.d_pose[i].leftCols<3>() = -dproj * skew(Rray) * Jl;
      out.d_pose[i].rightCols<3>() = rho * dproj;
    }
  }
  return out;
}

FlowField rigid_flow(const DepthMap& d, const Pose6& p, const CameraIntrinsics& k) {
  return rigid_flow_jacobian(d, p, k).flow;
}

namespace {

struct Tap {
  int x0, x1, y0, y1;
  double ax, ay;
};

// Bilinear footprint of the sample at (sx, sy). Returns false when the sample
// lies outside the closed pixel-centre rectangle.
bool bilinear_tap(double sx, double sy, int w, int h, Tap& tap) {
  if (!(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1)) return false;
  tap.x0 = w >= 2 ? std::min(static_cast<int>(std::floor(sx)), w - 2) : 0;
  tap.y0 = h >= 2 ? std::min(static_cast<int>(std::floor(sy)), h - 2) : 0;
  tap.x1 = std::min(tap.x0 + 1, w - 1);
  tap.y1 = std::min(tap.y0 + 1, h - 1);
  tap.ax = sx - tap.x0;
  tap.ay = sy - tap.y0;
  return true;
}

void check_flow_shape(const Image& src, const FlowField& flow) {
  if (!src.same_size(flow.height(), flow.width())) {
    throw DimensionError("bilinear_warp: source image and flow differ in size");
  }
}

}  // namespace

WarpResult bilinear_warp(const Image& src, const FlowField& flow) {
  check_flow_shape(src, flow);
  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  WarpResult out{Image(h, w, ch), Mask(h, w, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!flow.valid[i]) continue;
      Tap t;
      if (!bilinear_tap(x + flow.u[i], y + flow.v[i], w, h, t)) continue;
      out.valid[i] = 1;
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - t.ax) * src.at(t.y0, t.x0, c) + t.ax * src.at(t.y0, t.x1, c);
        const double bot = (1.0 - t.ax) * src.at(t.y1, t.x0, c) + t.ax * src.at(t.y1, t.x1, c);
        out.image.at(y, x, c) = (1.0 - t.ay) * top + t.ay * bot;
      }
    }
  }
  return out;
}

WarpGradient bilinear_warp_backward(const Image& src, const FlowField& flow,
                                    const Image& grad_out, Image* grad_src) {
  check_flow_shape(src, flow);
  if (!grad_out.same_shape(src)) throw DimensionError("bilinear_warp_backward: gradient shape");
  if (grad_src && !grad_src->same_shape(src)) {
    throw DimensionError("bilinear_warp_backward: source gradient shape");
  }
  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  WarpGradient g{Raster<double>(h, w, 0.0), Raster<double>(h, w, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!flow.valid[i]) continue;
      Tap t;
      if (!bilinear_tap(x + flow.u[i], y + flow.v[i], w, h, t)) continue;
      double gu = 0.0;
      double gv = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double go = grad_out.at(y, x, c);
        if (go == 0.0) continue;
        const double s00 = src.at(t.y0, t.x0, c);
        const double s01 = src.at(t.y0, t.x1, c);
        const double s10 = src.at(t.y1, t.x0, c);
        const double s11 = src.at(t.y1, t.x1, c);
        gu += go * ((1.0 - t.ay) * (s01 - s00) + t.ay * (s11 - s10));
        gv += go * ((1.0 - t.ax) * (s10 - s00) + t.ax * (s11 - s01));
        if (grad_src) {
          grad_src->at(t.y0, t.x0, c) += go * (1.0 - t.ax) * (1.0 - t.ay);
          grad_src->at(t.y0, t.x1, c) += go * t.ax * (1.0 - t.ay);
          grad_src->at(t.y1, t.x0, c) += go * (1.0 - t.ax) * t.ay;
          grad_src->at(t.y1, t.x1, c) += go * t.ax * t.ay;
        }
      }
      g.u[i] = gu;
      g.v[i] = gv;
    }
  }
  return g;
}

}  // namespace semgeo
