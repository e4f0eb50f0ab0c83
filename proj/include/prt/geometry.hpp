#pragma once

#include <vector>

#include "prt/types.hpp"

namespace prt::geometry {

// Depth-map pixels lifted to camera-frame points. The source pixel of
// every point is retained so that cropping by a pixel box stays exact.
struct LiftedCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint32_t> pixels;  // v * width + u, parallel to points
};

// Back-projects every non-sentinel pixel:
//   z = d(u, v), x = (u - cx) * z / fx, y = (v - cy) * z / fy.
LiftedCloud lift_depth_map(const DepthMap& depth, const CameraIntrinsics& cam);
LiftedCloud lift_depth_map_serial(const DepthMap& depth, const CameraIntrinsics& cam);

// Inverse of the lift. Requires z > 0.
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};
PixelCoord project_point(const Eigen::Vector3d& p, const CameraIntrinsics& cam);

// Lifted points of the non-sentinel pixels whose centers fall in `box`
// (half-open). A box that misses the image yields an empty patch.
PseudoLiDARPatch crop_patch(const DepthMap& depth, const CameraIntrinsics& cam,
                            const BBox2D& box, int frame_index = 0);

// Rotation applied in intrinsic Z*Y*X order (yaw, pitch, roll), then
// translation.
RigidTransform pose_from_euler(const Eigen::Vector3d& translation,
                               const Eigen::Vector3d& rotation_xyz);

// Maps every point p of a frame-(t-j) patch into frame-t camera
// coordinates: p' = H_t^-1 * H_{t-j} * p. Frame index is preserved.
PseudoLiDARPatch compensate_ego_motion(const PseudoLiDARPatch& patch,
                                       const RigidTransform& pose_t,
                                       const RigidTransform& pose_tmj);
PseudoLiDARPatch compensate_ego_motion_serial(const PseudoLiDARPatch& patch,
                                              const RigidTransform& pose_t,
                                              const RigidTransform& pose_tmj);

}  // namespace prt::geometry
