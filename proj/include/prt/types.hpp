#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace prt {

// Pinhole camera. Convention everywhere: x right, y down, z forward;
// pixel (u, v) has its center at continuous image coordinates (u, v).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
    if (!(cx >= 0.0 && cx < width)) throw std::invalid_argument("intrinsics: cx out of image");
    if (!(cy >= 0.0 && cy < height)) throw std::invalid_argument("intrinsics: cy out of image");
  }
};

// Dense depth in meters, row-major, one value per pixel. 0.0 marks
// "no return" (sky / out of range). Stored as float32 to match the
// on-disk grid format bit for bit; all math on it is done in doubles.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  static constexpr float kNoReturn = 0.0f;

  float at(int u, int v) const { return values[static_cast<size_t>(v) * width + u]; }
  float& at(int u, int v) { return values[static_cast<size_t>(v) * width + u]; }

  void validate() const {
    if (values.size() != static_cast<size_t>(width) * height)
      throw std::invalid_argument("depth map: size mismatch");
    for (float z : values) {
      if (!std::isfinite(z) || z < 0.0f) throw std::invalid_argument("depth map: values must be finite and >= 0");
    }
  }
};

// Axis-aligned 2D box in pixel coordinates. Pixel-membership rule is
// half-open on pixel centers: pixel (u, v) is inside iff
// x1 <= u < x2 and y1 <= v < y2.
struct BBox2D {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool contains_pixel(int u, int v) const {
    return u >= x1 && u < x2 && v >= y1 && v < y2;
  }

  void validate() const {
    if (!(x1 < x2 && y1 < y2)) throw std::invalid_argument("bbox2d: requires x1 < x2 and y1 < y2");
  }
};

// 4x4 homogeneous camera-to-global transform. Translation in meters.
class RigidTransform {
 public:
  RigidTransform() : m_(Eigen::Matrix4d::Identity()) {}

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    validate_matrix(m);
    RigidTransform t;
    t.m_ = m;
    return t;
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  // Exact closed-form inverse for rigid transforms.
  RigidTransform inverse() const {
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    const Eigen::Matrix3d rt = rotation().transpose();
    inv.topLeftCorner<3, 3>() = rt;
    inv.topRightCorner<3, 1>() = -rt * translation();
    RigidTransform t;
    t.m_ = inv;
    return t;
  }

  RigidTransform compose(const RigidTransform& rhs) const {
    RigidTransform t;
    t.m_ = m_ * rhs.m_;
    // Re-orthonormality is preserved to rounding; keep the bottom row exact.
    t.m_.row(3) << 0, 0, 0, 1;
    return t;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation() * p + translation();
  }

  static void validate_matrix(const Eigen::Matrix4d& m) {
    if (m.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
      throw std::invalid_argument("rigid transform: bottom row must be (0,0,0,1)");
    const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    const double ortho = (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9) throw std::invalid_argument("rigid transform: rotation block not orthonormal");
    if (std::abs(r.determinant() - 1.0) > 1e-9)
      throw std::invalid_argument("rigid transform: rotation determinant must be +1");
  }

 private:
  Eigen::Matrix4d m_;
};

// Point set cropped for one object's 2D box, camera coordinates of its
// reference frame. May be empty for occluded or truncated objects.
struct PseudoLiDARPatch {
  std::vector<Eigen::Vector3d> points;
  int frame_index = 0;
};

// Synthetic per-pixel channels consumed by the appearance encoder:
//   0: object silhouette mask (nearest-hit ownership)
//   1: u / width    2: v / height
//   3: per-instance shading constant
struct AppearanceMap {
  static constexpr int kChannels = 4;
  int width = 0;
  int height = 0;
  std::vector<float> values;  // planar, channel-major, each row-major

  float at(int c, int u, int v) const {
    return values[(static_cast<size_t>(c) * height + v) * width + u];
  }
  float& at(int c, int u, int v) {
    return values[(static_cast<size_t>(c) * height + v) * width + u];
  }
};

// Yawed 3D box in camera coordinates. BEV footprint lives in the (x, z)
// plane; yaw is the angle of the length axis from +x toward +z. The
// vertical extent spans y in [center.y - h/2, center.y + h/2].
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Zero();  // (length, width, height)
  double yaw = 0.0;

  void validate() const {
    if (!(size.x() > 0 && size.y() > 0 && size.z() > 0))
      throw std::invalid_argument("box3d: size components must be > 0");
  }
};

}  // namespace prt
