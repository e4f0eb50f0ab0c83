#include "prt/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "prt/geometry.hpp"
#include "prt/rng.hpp"

namespace prt::sim {

namespace {

constexpr double kMinDepth = 1e-3;

struct Ray {
  Eigen::Vector3d origin;  // world
  Eigen::Vector3d dir;     // world, scaled so the parameter equals camera z
};

// Entry parameter of the ray against a yawed cuboid, or a negative value
// when there is no acceptable hit. Slab test in the box's local frame.
double intersect_box(const Ray& ray, const ObjectState& obj, double near_clip) {
  const double c = std::cos(obj.yaw), s = std::sin(obj.yaw);
  const Eigen::Vector3d rel = ray.origin - obj.center;
  // Rotate by -yaw about world z.
  const Eigen::Vector3d o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
  const Eigen::Vector3d d(c * ray.dir.x() + s * ray.dir.y(),
                          -s * ray.dir.x() + c * ray.dir.y(), ray.dir.z());
  const Eigen::Vector3d half = obj.size * 0.5;

  double tmin = -1e300, tmax = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < -half[a] || o[a] > half[a]) return -1.0;
      continue;
    }
    double t0 = (-half[a] - o[a]) / d[a];
    double t1 = (half[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return -1.0;
  }
  if (tmax < near_clip) return -1.0;
  return tmin >= near_clip ? tmin : -1.0;
}

struct RaycastResult {
  DepthMap depth;
  OwnerMap owners;
};

// Z-buffer over ground plane and cuboids. The loop body is pure per
// pixel, so the parallel and serial paths produce identical bits.
template <bool Parallel>
RaycastResult raycast(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                      const CameraIntrinsics& cam, double near_clip) {
  cam.validate();
  RaycastResult res;
  res.depth.width = cam.width;
  res.depth.height = cam.height;
  res.depth.values.assign(static_cast<size_t>(cam.width) * cam.height, DepthMap::kNoReturn);
  res.owners.width = cam.width;
  res.owners.height = cam.height;
  res.owners.owners.assign(static_cast<size_t>(cam.width) * cam.height, OwnerMap::kSky);

  const Eigen::Matrix3d rot = ego_pose.rotation();
  const Eigen::Vector3d origin = ego_pose.translation();

#pragma omp parallel for schedule(static) if (Parallel)
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const Ray ray{origin, rot * dir_cam};

      double best = 1e300;
      std::int32_t owner = OwnerMap::kSky;
      if (ray.dir.z() < -1e-12) {
        const double tg = -origin.z() / ray.dir.z();
        if (tg >= near_clip) {
          best = tg;
          owner = OwnerMap::kGround;
        }
      }
      for (size_t i = 0; i < objects.size(); ++i) {
        const double t = intersect_box(ray, objects[i], near_clip);
        if (t > 0.0 && t < best) {
          best = t;
          owner = static_cast<std::int32_t>(i);
        }
      }
      if (owner != OwnerMap::kSky) {
        res.depth.at(u, v) = static_cast<float>(best);
        res.owners.owners[static_cast<size_t>(v) * cam.width + u] = owner;
      }
    }
  }
  return res;
}

}  // namespace

DepthMap render_depth(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                      const CameraIntrinsics& cam, double near_clip) {
  return raycast<true>(ego_pose, objects, cam, near_clip).depth;
}

DepthMap render_depth_serial(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                             const CameraIntrinsics& cam, double near_clip) {
  return raycast<false>(ego_pose, objects, cam, near_clip).depth;
}

OwnerMap render_owner_map(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                          const CameraIntrinsics& cam, double near_clip) {
  return raycast<true>(ego_pose, objects, cam, near_clip).owners;
}

DepthMap corrupt_depth(const DepthMap& depth, double target_mean_rel_error, std::uint64_t seed) {
  if (!(target_mean_rel_error >= 0.0))
    throw std::invalid_argument("corrupt_depth: target must be >= 0");
  if (target_mean_rel_error == 0.0) return depth;
  // Half-normal mean identity: E|eps| = sigma * sqrt(2/pi).
  const double sigma = target_mean_rel_error * std::sqrt(M_PI / 2.0);
  Rng rng(seed);
  DepthMap out = depth;
  for (float& z : out.values) {
    if (z == DepthMap::kNoReturn) continue;
    const double zn = static_cast<double>(z) * (1.0 + sigma * rng.gaussian());
    z = static_cast<float>(std::max(zn, kMinDepth));
  }
  return out;
}

DepthMap corrupt_depth_structured(const DepthMap& depth, const OwnerMap& owners, int object_count,
                                  const NoiseConfig& noise, std::uint64_t seed) {
  if (depth.width != owners.width || depth.height != owners.height)
    throw std::invalid_argument("corrupt_depth_structured: owner map dimensions disagree");
  Rng rng(mix_seed(seed, 0xb1a5ULL));

  std::vector<double> bias(static_cast<size_t>(std::max(object_count, 0)));
  for (double& b : bias) b = noise.object_bias_std * rng.gaussian();

  const int rows = noise.field_rows, cols = noise.field_cols;
  std::vector<double> field(static_cast<size_t>(rows + 1) * (cols + 1));
  for (double& f : field) f = noise.ground_field_std * rng.gaussian();
  const auto field_at = [&](int u, int v) {
    const double gu = depth.width > 1 ? static_cast<double>(u) / (depth.width - 1) * cols : 0.0;
    const double gv = depth.height > 1 ? static_cast<double>(v) / (depth.height - 1) * rows : 0.0;
    const int j = std::min(static_cast<int>(gu), cols - 1);
    const int i = std::min(static_cast<int>(gv), rows - 1);
    const double fu = gu - j, fv = gv - i;
    const auto node = [&](int ii, int jj) { return field[static_cast<size_t>(ii) * (cols + 1) + jj]; };
    return (1 - fv) * ((1 - fu) * node(i, j) + fu * node(i, j + 1)) +
           fv * ((1 - fu) * node(i + 1, j) + fu * node(i + 1, j + 1));
  };

  DepthMap out = depth;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      float& z = out.at(u, v);
      if (z == DepthMap::kNoReturn) continue;
      const std::int32_t owner = owners.at(u, v);
      double factor = 1.0;
      if (owner >= 0 && owner < object_count) {
        factor = 1.0 + bias[owner];
      } else if (owner == OwnerMap::kGround) {
        factor = 1.0 + field_at(u, v);
      }
      z = static_cast<float>(std::max(static_cast<double>(z) * factor, kMinDepth));
    }
  }
  return corrupt_depth(out, noise.pixel_target, mix_seed(seed, 0x11dULL));
}

namespace {

AppearanceMap appearance_from_owners(const OwnerMap& owners, const std::vector<ObjectState>& objects,
                                     const CameraIntrinsics& cam) {
  AppearanceMap app;
  app.width = cam.width;
  app.height = cam.height;
  app.values.assign(static_cast<size_t>(AppearanceMap::kChannels) * cam.width * cam.height, 0.0f);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const std::int32_t owner = owners.at(u, v);
      app.at(1, u, v) = static_cast<float>(static_cast<double>(u) / cam.width);
      app.at(2, u, v) = static_cast<float>(static_cast<double>(v) / cam.height);
      if (owner >= 0) {
        app.at(0, u, v) = 1.0f;
        const int id = objects[owner].id;
        const double shade =
            0.25 + 0.75 * static_cast<double>(mix_seed(static_cast<std::uint64_t>(id), 0x5eedULL) % 4096) / 4096.0;
        app.at(3, u, v) = static_cast<float>(shade);
      }
    }
  }
  return app;
}

}  // namespace

AppearanceMap render_appearance(const RigidTransform& ego_pose, const std::vector<ObjectState>& objects,
                                const CameraIntrinsics& cam, double near_clip) {
  return appearance_from_owners(render_owner_map(ego_pose, objects, cam, near_clip), objects, cam);
}

namespace {

// Tight projected pixel bounds of the cuboid, near-plane clipped.
// Returns false when the object is entirely behind the clip plane or
// projects outside the image.
bool project_bounds(const ObjectState& obj, const RigidTransform& ego_pose,
                    const CameraIntrinsics& cam, double near_clip, BBox2D* out) {
  const double c = std::cos(obj.yaw), s = std::sin(obj.yaw);
  const Eigen::Vector3d half = obj.size * 0.5;
  std::array<Eigen::Vector3d, 8> corners_cam;
  const RigidTransform world_to_cam = ego_pose.inverse();
  int k = 0;
  for (int ix : {-1, 1})
    for (int iy : {-1, 1})
      for (int iz : {-1, 1}) {
        const Eigen::Vector3d local(ix * half.x(), iy * half.y(), iz * half.z());
        const Eigen::Vector3d world = obj.center + Eigen::Vector3d(c * local.x() - s * local.y(),
                                                                   s * local.x() + c * local.y(),
                                                                   local.z());
        corners_cam[k++] = world_to_cam.apply(world);
      }

  static constexpr int kEdges[12][2] = {{0, 1}, {0, 2}, {0, 4}, {1, 3}, {1, 5}, {2, 3},
                                        {2, 6}, {3, 7}, {4, 5}, {4, 6}, {5, 7}, {6, 7}};
  double u_min = 1e300, u_max = -1e300, v_min = 1e300, v_max = -1e300;
  bool any = false;
  const auto add = [&](const Eigen::Vector3d& p) {
    const auto px = geometry::project_point(p, cam);
    u_min = std::min(u_min, px.u);
    u_max = std::max(u_max, px.u);
    v_min = std::min(v_min, px.v);
    v_max = std::max(v_max, px.v);
    any = true;
  };
  for (const auto& p : corners_cam)
    if (p.z() > near_clip) add(p);
  for (const auto& e : kEdges) {
    const Eigen::Vector3d &a = corners_cam[e[0]], &b = corners_cam[e[1]];
    if ((a.z() > near_clip) != (b.z() > near_clip)) {
      const double t = (near_clip - a.z()) / (b.z() - a.z());
      add(a + t * (b - a));
    }
  }
  if (!any) return false;

  u_min = std::max(u_min, 0.0);
  v_min = std::max(v_min, 0.0);
  u_max = std::min(u_max, static_cast<double>(cam.width));
  v_max = std::min(v_max, static_cast<double>(cam.height));
  if (!(u_min < u_max && v_min < v_max)) return false;
  *out = {u_min, v_min, u_max, v_max};
  return true;
}

}  // namespace

std::vector<ObjectLabel> label_objects(const RigidTransform& ego_pose,
                                       const std::vector<ObjectState>& objects,
                                       const CameraIntrinsics& cam, const DepthMap& depth_clean,
                                       double visibility_threshold, double near_clip) {
  std::vector<ObjectLabel> labels;
  const RigidTransform world_to_cam = ego_pose.inverse();
  const Eigen::Matrix3d rot = ego_pose.rotation();
  const Eigen::Vector3d origin = ego_pose.translation();

  for (const auto& obj : objects) {
    const Eigen::Vector3d center_cam = world_to_cam.apply(obj.center);
    if (center_cam.z() <= near_clip) continue;

    ObjectLabel label;
    label.id = obj.id;
    if (!project_bounds(obj, ego_pose, cam, near_clip, &label.bbox2d)) continue;
    label.gt_depth = center_cam.z();

    const Eigen::Vector3d axis_cam = world_to_cam.rotation() * Eigen::Vector3d(std::cos(obj.yaw), std::sin(obj.yaw), 0.0);
    label.box3d.center = center_cam;
    label.box3d.size = obj.size;
    label.box3d.yaw = std::atan2(axis_cam.z(), axis_cam.x());

    // Visibility: cast the object's own rays over its box and compare the
    // entry depth against the rendered z-buffer.
    long silhouette = 0, visible = 0;
    const int u0 = std::max(0, static_cast<int>(std::ceil(label.bbox2d.x1)));
    const int u1 = std::min(cam.width - 1, static_cast<int>(std::ceil(label.bbox2d.x2)) - 1);
    const int v0 = std::max(0, static_cast<int>(std::ceil(label.bbox2d.y1)));
    const int v1 = std::min(cam.height - 1, static_cast<int>(std::ceil(label.bbox2d.y2)) - 1);
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const Eigen::Vector3d dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
        const Ray ray{origin, rot * dir_cam};
        const double t = intersect_box(ray, obj, near_clip);
        if (t <= 0.0) continue;
        ++silhouette;
        const double zbuf = depth_clean.at(u, v);
        if (zbuf != DepthMap::kNoReturn && std::abs(t - zbuf) <= 1e-4 + 1e-5 * t) ++visible;
      }
    }
    if (silhouette == 0) continue;
    label.visibility = static_cast<double>(visible) / static_cast<double>(silhouette);
    if (label.visibility < visibility_threshold) continue;
    labels.push_back(label);
  }
  return labels;
}

void SceneConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw std::invalid_argument("scene config: " + msg); };
  if (image_width < 2 || image_height < 2) fail("image dimensions must be >= 2");
  if (!(focal > 0)) fail("focal must be > 0");
  if (frames < 1) fail("frames must be >= 1");
  if (!(dt > 0)) fail("dt must be > 0");
  if (vehicle_count < 0) fail("vehicle_count must be >= 0");
  if (cam_height_min > cam_height_max || cam_height_min <= 0) fail("camera height range invalid");
  if (ego_speed_min > ego_speed_max || ego_speed_min < 0) fail("ego speed range invalid");
  if (spawn_forward_min > spawn_forward_max) fail("spawn forward range invalid");
  if (spawn_lateral_min > spawn_lateral_max) fail("spawn lateral range invalid");
  if (!(vehicle_size_base.minCoeff() > 0)) fail("vehicle size must be > 0");
  if (vehicle_size_jitter < 0 || vehicle_size_jitter >= 1) fail("size jitter must be in [0, 1)");
  if (parked_fraction < 0 || parked_fraction > 1) fail("parked fraction must be in [0, 1]");
  if (velocity_noise < 0) fail("velocity noise must be >= 0");
  if (visibility_threshold < 0 || visibility_threshold > 1) fail("visibility threshold must be in [0, 1]");
  if (noise.pixel_target < 0 || noise.object_bias_std < 0 || noise.ground_field_std < 0)
    fail("noise levels must be >= 0");
  if (noise.field_cols < 1 || noise.field_rows < 1) fail("noise field grid must be >= 1x1");
  if (ego_segment_frames < 1) fail("ego segment frames must be >= 1");
  if (!(near_clip > 0)) fail("near clip must be > 0");
}

namespace {

struct EgoState {
  double x = 0, y = 0, heading = 0, speed = 0, curvature = 0;
};

RigidTransform ego_camera_pose(const EgoState& e, double cam_height) {
  // Camera axes: x right, y down, z forward along the heading.
  return geometry::pose_from_euler({e.x, e.y, cam_height},
                                   {-M_PI / 2.0, 0.0, e.heading - M_PI / 2.0});
}

std::vector<ObjectState> spawn_vehicles(const SceneConfig& cfg, Rng& rng) {
  std::vector<ObjectState> objects;
  for (int i = 0; i < cfg.vehicle_count; ++i) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double fwd = rng.uniform(cfg.spawn_forward_min, cfg.spawn_forward_max);
      const double lat = rng.uniform(cfg.spawn_lateral_min, cfg.spawn_lateral_max);
      ObjectState obj;
      obj.id = i;
      obj.size = {cfg.vehicle_size_base.x() * (1.0 + rng.uniform(-cfg.vehicle_size_jitter, cfg.vehicle_size_jitter)),
                  cfg.vehicle_size_base.y() * (1.0 + rng.uniform(-cfg.vehicle_size_jitter, cfg.vehicle_size_jitter)),
                  cfg.vehicle_size_base.z() * (1.0 + rng.uniform(-cfg.vehicle_size_jitter, cfg.vehicle_size_jitter))};
      obj.center = {fwd, lat, obj.size.z() / 2.0};
      const bool parked = rng.uniform() < cfg.parked_fraction;
      obj.yaw = rng.uniform(-0.6, 0.6);
      if (parked) {
        obj.velocity = {0.0, 0.0};
      } else {
        const double speed = rng.uniform(0.0, cfg.vehicle_speed_max);
        obj.velocity = {speed * std::cos(obj.yaw), speed * std::sin(obj.yaw)};
      }
      bool separated = true;
      for (const auto& other : objects) {
        if ((other.center - obj.center).head<2>().norm() < cfg.spawn_min_separation) {
          separated = false;
          break;
        }
      }
      if (separated) {
        objects.push_back(obj);
        break;
      }
    }
  }
  return objects;
}

}  // namespace

Sequence generate_sequence(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  Sequence seq;
  seq.config = config;
  seq.seed = seed;
  seq.intrinsics = config.intrinsics();

  Rng ego_rng(mix_seed(seed, 1));
  Rng spawn_rng(mix_seed(seed, 2));
  Rng motion_rng(mix_seed(seed, 4));
  const double cam_height = Rng(mix_seed(seed, 5)).uniform(config.cam_height_min, config.cam_height_max);

  EgoState ego;
  ego.speed = ego_rng.uniform(config.ego_speed_min, config.ego_speed_max);
  double target_speed = ego.speed;
  double target_curv = 0.0;

  std::vector<ObjectState> objects = spawn_vehicles(config, spawn_rng);

  seq.frames.reserve(config.frames);
  for (int f = 0; f < config.frames; ++f) {
    if (f > 0) {
      // Vehicles: constant velocity plus a small seeded perturbation.
      for (auto& obj : objects) {
        obj.velocity.x() += config.velocity_noise * motion_rng.gaussian();
        obj.velocity.y() += config.velocity_noise * motion_rng.gaussian();
        obj.center.x() += obj.velocity.x() * config.dt;
        obj.center.y() += obj.velocity.y() * config.dt;
      }
      // Ego: rate-limited approach to piecewise-constant targets.
      if (f % config.ego_segment_frames == 0) {
        target_speed = ego_rng.uniform(config.ego_speed_min, config.ego_speed_max);
        target_curv = ego_rng.uniform(-config.ego_curvature_max, config.ego_curvature_max);
      }
      const double dv = std::clamp(target_speed - ego.speed, -config.ego_accel_max * config.dt,
                                   config.ego_accel_max * config.dt);
      const double dk = std::clamp(target_curv - ego.curvature, -config.ego_curvature_rate * config.dt,
                                   config.ego_curvature_rate * config.dt);
      ego.speed += dv;
      ego.curvature += dk;
      ego.heading += ego.curvature * ego.speed * config.dt;
      ego.x += ego.speed * std::cos(ego.heading) * config.dt;
      ego.y += ego.speed * std::sin(ego.heading) * config.dt;
    }

    FrameObservation frame;
    frame.frame_index = f;
    frame.ego_pose = ego_camera_pose(ego, cam_height);

    RaycastResult rc = raycast<true>(frame.ego_pose, objects, seq.intrinsics, config.near_clip);
    frame.depth_clean = std::move(rc.depth);
    frame.appearance = appearance_from_owners(rc.owners, objects, seq.intrinsics);
    frame.objects = label_objects(frame.ego_pose, objects, seq.intrinsics, frame.depth_clean,
                                  config.visibility_threshold, config.near_clip);

    const std::uint64_t frame_noise_seed = mix_seed(seed, 3, static_cast<std::uint64_t>(f));
    if (config.noise.structured) {
      frame.depth_noisy = corrupt_depth_structured(frame.depth_clean, rc.owners,
                                                   static_cast<int>(objects.size()), config.noise,
                                                   frame_noise_seed);
    } else {
      frame.depth_noisy = corrupt_depth(frame.depth_clean, config.noise.pixel_target, frame_noise_seed);
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace prt::sim
