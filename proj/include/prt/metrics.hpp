#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "prt/types.hpp"

namespace prt::metrics {

// The five per-object depth error measures. Zero error gives
// (0, 0, 0, 0, 1).
struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;  // fraction with max(p/g, g/p) < 1.25
};

// rmse_log uses the natural logarithm by default; use_log10 switches to
// the base-10 variant.
DepthMetrics depth_metrics(const std::vector<double>& pred, const std::vector<double>& gt,
                           bool use_log10 = false);

double iou_2d(const BBox2D& a, const BBox2D& b);

// Bird's-eye-view overlap of yawed footprints (convex polygon clipping),
// and the volumetric variant with vertical-extent overlap.
double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

struct DetectionRecord {
  Box3D box;
  double score = 1.0;
  int frame_index = 0;
  int payload = -1;  // not interpreted here; carries GT correspondence upstream
};

struct GroundTruth3D {
  Box3D box;
  int frame_index = 0;
  int id = 0;
};

// Detection AP: detections in descending score order greedily match at
// most one unmatched same-frame GT with IoU >= threshold; the score is
// the area under the monotone-envelope (all-point) PR curve.
double average_precision(const std::vector<DetectionRecord>& detections,
                         const std::vector<GroundTruth3D>& ground_truth,
                         const std::function<double(const Box3D&, const Box3D&)>& iou_fn,
                         double iou_threshold);

struct MotBox {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct MotReport {
  std::optional<double> mota;  // empty when there is no ground truth
  int ids = 0;
  int fp = 0;
  int fn = 0;
  int gt_count = 0;
  int matches = 0;
};

// CLEAR procedure: previous matches persist while still within the gate,
// the remainder is matched by optimal assignment on center distance, and
// an identity switch is counted when a GT's matched track changes between
// its consecutive matched frames.
MotReport mot_metrics(const std::vector<std::vector<MotBox>>& tracked,
                      const std::vector<std::vector<MotBox>>& ground_truth,
                      double match_distance);

}  // namespace prt::metrics
