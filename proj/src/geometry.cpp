#include "prt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prt::geometry {

namespace {

inline Eigen::Vector3d lift_pixel(int u, int v, double z, const CameraIntrinsics& cam) {
  return {(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z};
}

void check_dims(const DepthMap& depth, const CameraIntrinsics& cam) {
  if (depth.width != cam.width || depth.height != cam.height)
    throw std::invalid_argument("lift: depth map and intrinsics dimensions disagree");
}

}  // namespace

LiftedCloud lift_depth_map_serial(const DepthMap& depth, const CameraIntrinsics& cam) {
  check_dims(depth, cam);
  LiftedCloud cloud;
  cloud.points.reserve(depth.values.size());
  cloud.pixels.reserve(depth.values.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double z = depth.at(u, v);
      if (z == DepthMap::kNoReturn) continue;
      cloud.points.push_back(lift_pixel(u, v, z, cam));
      cloud.pixels.push_back(static_cast<std::uint32_t>(v) * depth.width + u);
    }
  }
  return cloud;
}

LiftedCloud lift_depth_map(const DepthMap& depth, const CameraIntrinsics& cam) {
  check_dims(depth, cam);
  const int w = depth.width, h = depth.height;
  std::vector<Eigen::Vector3d> grid(static_cast<size_t>(w) * h);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double z = depth.at(u, v);
      if (z != DepthMap::kNoReturn) grid[static_cast<size_t>(v) * w + u] = lift_pixel(u, v, z, cam);
    }
  }
  // Compaction stays serial so the output order matches the serial path.
  LiftedCloud cloud;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (depth.at(u, v) == DepthMap::kNoReturn) continue;
      const std::uint32_t idx = static_cast<std::uint32_t>(v) * w + u;
      cloud.points.push_back(grid[idx]);
      cloud.pixels.push_back(idx);
    }
  }
  return cloud;
}

PixelCoord project_point(const Eigen::Vector3d& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0.0)) throw std::invalid_argument("project: point is behind the camera (z <= 0)");
  return {p.x() * cam.fx / p.z() + cam.cx, p.y() * cam.fy / p.z() + cam.cy, p.z()};
}

PseudoLiDARPatch crop_patch(const DepthMap& depth, const CameraIntrinsics& cam,
                            const BBox2D& box, int frame_index) {
  check_dims(depth, cam);
  box.validate();
  PseudoLiDARPatch patch;
  patch.frame_index = frame_index;
  const int u0 = std::max(0, static_cast<int>(std::ceil(box.x1)));
  const int u1 = std::min(depth.width - 1, static_cast<int>(std::ceil(box.x2)) - 1);
  const int v0 = std::max(0, static_cast<int>(std::ceil(box.y1)));
  const int v1 = std::min(depth.height - 1, static_cast<int>(std::ceil(box.y2)) - 1);
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      if (!box.contains_pixel(u, v)) continue;
      const double z = depth.at(u, v);
      if (z == DepthMap::kNoReturn) continue;
      patch.points.push_back(lift_pixel(u, v, z, cam));
    }
  }
  return patch;
}

RigidTransform pose_from_euler(const Eigen::Vector3d& translation,
                               const Eigen::Vector3d& rotation_xyz) {
  const Eigen::Matrix3d r =
      (Eigen::AngleAxisd(rotation_xyz.z(), Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(rotation_xyz.y(), Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(rotation_xyz.x(), Eigen::Vector3d::UnitX()))
          .toRotationMatrix();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = translation;
  return RigidTransform::from_matrix(m);
}

namespace {

Eigen::Matrix4d relative_transform(const RigidTransform& pose_t, const RigidTransform& pose_tmj) {
  RigidTransform::validate_matrix(pose_t.matrix());
  RigidTransform::validate_matrix(pose_tmj.matrix());
  return pose_t.inverse().compose(pose_tmj).matrix();
}

}  // namespace

PseudoLiDARPatch compensate_ego_motion_serial(const PseudoLiDARPatch& patch,
                                              const RigidTransform& pose_t,
                                              const RigidTransform& pose_tmj) {
  const Eigen::Matrix4d rel = relative_transform(pose_t, pose_tmj);
  PseudoLiDARPatch out;
  out.frame_index = patch.frame_index;
  out.points.resize(patch.points.size());
  for (size_t i = 0; i < patch.points.size(); ++i) {
    out.points[i] = rel.topLeftCorner<3, 3>() * patch.points[i] + rel.topRightCorner<3, 1>();
  }
  return out;
}

PseudoLiDARPatch compensate_ego_motion(const PseudoLiDARPatch& patch,
                                       const RigidTransform& pose_t,
                                       const RigidTransform& pose_tmj) {
  const Eigen::Matrix4d rel = relative_transform(pose_t, pose_tmj);
  const Eigen::Matrix3d rot = rel.topLeftCorner<3, 3>();
  const Eigen::Vector3d tr = rel.topRightCorner<3, 1>();
  PseudoLiDARPatch out;
  out.frame_index = patch.frame_index;
  out.points.resize(patch.points.size());
  const std::int64_t n = static_cast<std::int64_t>(patch.points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out.points[i] = rot * patch.points[i] + tr;
  }
  return out;
}

}  // namespace prt::geometry
