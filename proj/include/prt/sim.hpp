#pragma once

#include <cstdint>
#include <vector>

#include "prt/types.hpp"

namespace prt::sim {

// One vehicle: an axis-yawed cuboid standing on the ground plane
// (world z = 0, so center.z() == size.z() / 2), moving with constant
// ground-plane velocity plus a small seeded perturbation.
struct ObjectState {
  int id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();   // world meters
  Eigen::Vector3d size = Eigen::Vector3d::Zero();     // (length, width, height)
  double yaw = 0.0;                                   // about world vertical
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero(); // ground-plane m/s
};

struct ObjectLabel {
  int id = 0;
  BBox2D bbox2d;          // tight projected bounds, clamped to the image
  double gt_depth = 0.0;  // camera-frame z of the 3D box center
  Box3D box3d;            // camera frame
  double visibility = 0.0;
};

struct FrameObservation {
  int frame_index = 0;
  RigidTransform ego_pose;  // camera -> world
  DepthMap depth_clean;
  DepthMap depth_noisy;
  AppearanceMap appearance;
  std::vector<ObjectLabel> objects;
};

// Depth-noise model. The i.i.d. pixel component realizes the calibrated
// relative-error operating point; the structured components (a per-object
// per-frame bias plus a smooth low-frequency field over ground pixels)
// model the spatially correlated errors of per-frame dense-depth
// prediction, which single-frame averaging cannot remove.
struct NoiseConfig {
  bool structured = true;
  double pixel_target = 0.03;      // mean |rel err| of the i.i.d. component
  double object_bias_std = 0.11;   // per (object, frame) multiplicative bias
  double ground_field_std = 0.11;  // smooth-field std over ground pixels
  int field_cols = 8;
  int field_rows = 6;
};

struct SceneConfig {
  int image_width = 384;
  int image_height = 128;
  double focal = 400.0;

  int frames = 40;
  double dt = 0.1;

  // Camera mount height; sampled uniformly per sequence.
  double cam_height_min = 1.6;
  double cam_height_max = 1.6;

  // Ego trajectory: piecewise-constant speed/curvature targets with
  // rate-limited transitions.
  double ego_speed_min = 3.0;
  double ego_speed_max = 11.0;
  double ego_accel_max = 2.5;        // m/s^2
  double ego_curvature_max = 0.03;   // 1/m
  double ego_curvature_rate = 0.02;  // 1/m per second
  int ego_segment_frames = 20;

  int vehicle_count = 8;
  double spawn_forward_min = 8.0;
  double spawn_forward_max = 45.0;
  double spawn_lateral_min = -8.0;
  double spawn_lateral_max = 8.0;
  double spawn_min_separation = 3.5;
  Eigen::Vector3d vehicle_size_base = {4.5, 1.9, 1.6};
  double vehicle_size_jitter = 0.10;   // relative, uniform +-
  double parked_fraction = 0.3;
  double vehicle_speed_max = 10.0;
  double velocity_noise = 0.05;        // m/s per frame

  double visibility_threshold = 0.25;
  double near_clip = 0.5;

  NoiseConfig noise;

  CameraIntrinsics intrinsics() const {
    return {focal, focal, image_width / 2.0, image_height / 2.0, image_width, image_height};
  }
  void validate() const;
};

struct Sequence {
  std::vector<FrameObservation> frames;
  CameraIntrinsics intrinsics;
  std::uint64_t seed = 0;
  SceneConfig config;
};

// Per-pixel owner of the nearest hit: index into the object list,
// kGround, or kSky.
struct OwnerMap {
  static constexpr std::int32_t kSky = -1;
  static constexpr std::int32_t kGround = -2;
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> owners;

  std::int32_t at(int u, int v) const { return owners[static_cast<size_t>(v) * width + u]; }
};

Sequence generate_sequence(const SceneConfig& config, std::uint64_t seed);

// Z-buffer over the ground plane and every cuboid's visible faces;
// sky pixels get the 0.0 sentinel. `cam_height` is implicit in ego_pose.
DepthMap render_depth(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                      const CameraIntrinsics& cam, double near_clip = 0.5);
DepthMap render_depth_serial(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                             const CameraIntrinsics& cam, double near_clip = 0.5);

OwnerMap render_owner_map(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                          const CameraIntrinsics& cam, double near_clip = 0.5);

// Multiplicative i.i.d. relative noise: z -> z * (1 + eps) with
// eps ~ N(0, (target * sqrt(pi/2))^2), so E|eps| = target. Sentinels are
// preserved and outputs are clamped positive.
DepthMap corrupt_depth(const DepthMap& depth, double target_mean_rel_error, std::uint64_t seed);

// Structured corruption used by the benchmark's noisy channel: per-object
// bias on object pixels, bilinear smooth field on ground pixels, then the
// i.i.d. component at noise.pixel_target.
DepthMap corrupt_depth_structured(const DepthMap& depth, const OwnerMap& owners, int object_count,
                                  const NoiseConfig& noise, std::uint64_t seed);

AppearanceMap render_appearance(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                                const CameraIntrinsics& cam, double near_clip = 0.5);

std::vector<ObjectLabel> label_objects(const RigidTransform& ego_pose,
                                       const std::vector<ObjectState>& objects,
                                       const CameraIntrinsics& cam, const DepthMap& depth_clean,
                                       double visibility_threshold = 0.25, double near_clip = 0.5);

}  // namespace prt::sim
