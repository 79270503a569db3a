#pragma once

// Pinhole camera, rigid poses, rigid flow and differentiable bilinear warping.
//
// Pose convention: a Pose6 maps points expressed in the target camera frame
// into the source camera frame, P_s = R * P_t + t. Flow is target-to-source:
// target pixel p reconstructs from the source sample at p + flow(p).

#include <vector>

#include <Eigen/Core>

#include "semgeo/core.hpp"

namespace semgeo {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws ArgumentError unless fx, fy > 0 and all entries are finite.
  void validate() const;

  /// Intrinsics for pyramid level `level` of 2x2 mean pooling. Focal lengths
  /// halve per level; the principal point follows pixel centres, so
  /// c' = (c + 0.5) / 2 - 0.5 per level.
  CameraIntrinsics at_level(int level) const;
};

/// Axis-angle rotation (radians * unit axis) and translation (meters).
struct Pose6 {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose6 identity() { return {}; }
  /// Packed as (r, t).
  Eigen::Matrix<double, 6, 1> as_vector() const;
  static Pose6 from_vector(const Eigen::Matrix<double, 6, 1>& v);
};

using Transform = Eigen::Matrix4d;

/// Exponential map of so(3). Below |r| = 1e-8 the second-order Taylor series is used.
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& r);

/// Left Jacobian of SO(3): d(exp(r) v)/dr = -[exp(r) v]_x * J_l(r).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// 4x4 rigid transform [R t; 0 1]. Non-finite input throws ArgumentError.
Transform pose_to_transform(const Pose6& p);

/// Inverse of a rigid transform, built as [R^T, -R^T t].
Transform transform_inverse(const Transform& T);

struct PointField {
  Raster<Eigen::Vector3d> xyz;
  Mask valid;
};

PointField backproject(const DepthMap& d, const CameraIntrinsics& k);

/// Rigid flow induced by depth d and ego-motion p. Pixels whose transformed
/// depth is not positive are invalid.
FlowField rigid_flow(const DepthMap& d, const Pose6& p, const CameraIntrinsics& k);

/// Rigid flow with per-pixel derivatives of the flow vector with respect to
/// inverse depth and to the packed pose (r, t). Derivatives are zero on
/// invalid pixels.
struct RigidFlowJacobian {
  FlowField flow;
  std::vector<Eigen::Vector2d> d_inverse_depth;
  std::vector<Eigen::Matrix<double, 2, 6>> d_pose;
};

RigidFlowJacobian rigid_flow_jacobian(const DepthMap& d, const Pose6& p,
                                      const CameraIntrinsics& k);

struct WarpResult {
  Image image;
  Mask valid;
};

/// Bilinear sample of src at p + flow(p). Samples outside [0, W-1] x [0, H-1]
/// or from invalid flow are zero and masked out.
WarpResult bilinear_warp(const Image& src, const FlowField& flow);

/// Reverse-mode derivative of bilinear_warp. `grad_out` holds dL/d(output)
/// with the output's shape; returns dL/d(u, v) per pixel and, when grad_src
/// is given, accumulates dL/d(src) into it. Invalid output pixels contribute
/// nothing.
struct WarpGradient {
  Raster<double> u;
  Raster<double> v;
};

WarpGradient bilinear_warp_backward(const Image& src, const FlowField& flow,
                                    const Image& grad_out, Image* grad_src = nullptr);

}  // namespace semgeo
