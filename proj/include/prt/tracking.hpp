#pragma once

#include <vector>

#include "prt/types.hpp"

namespace prt::tracking {

// ---------------------------------------------------------------------------
// Assignment

// Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).
// Returns row -> column, -1 for unassigned rows when rows > cols.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

// Optimal assignment maximizing total IoU; matches below the threshold are
// discarded afterwards.
Association associate(const std::vector<BBox2D>& tracks, const std::vector<BBox2D>& detections,
                      double iou_threshold);

// ---------------------------------------------------------------------------
// 2D tracker (SORT convention: state u, v, s, r with constant velocity on
// u, v, s and a static aspect ratio)

struct Tracker2DParams {
  double iou_threshold = 0.3;
  int min_hits = 2;
  int max_age = 3;

  double process_pos_var = 1.0;    // px^2
  double process_vel_var = 0.25;
  double process_area_rel = 0.01;  // relative to current area
  double process_aspect_var = 1e-4;

  double meas_pos_var = 1.0;       // px^2
  double meas_area_rel = 0.05;     // relative to measured area
  double meas_aspect_var = 0.01;

  double init_pos_var = 100.0;
  double init_vel_var = 1e4;
  double init_area_rel = 0.1;
  double init_aspect_var = 0.04;
};

struct Track2DState {
  Eigen::Matrix<double, 7, 1> mean;        // u, v, s, r, du, dv, ds
  Eigen::Matrix<double, 7, 7> covariance;
  int id = 0;
  int age = 0;
  int hits = 0;
  int time_since_update = 0;
};

Eigen::Matrix<double, 7, 7> transition_matrix_2d();
Eigen::Matrix<double, 4, 7> observation_matrix_2d();
Eigen::Matrix<double, 7, 7> process_noise_2d(const Track2DState& state, const Tracker2DParams& params);
Eigen::Matrix4d measurement_noise_2d(const Eigen::Vector4d& meas, const Tracker2DParams& params);

Eigen::Vector4d box_to_measurement(const BBox2D& box);
BBox2D measurement_to_box(const Eigen::Vector4d& meas);

Track2DState make_track_2d(const BBox2D& box, int id, const Tracker2DParams& params);
Track2DState kalman_predict(const Track2DState& state, const Tracker2DParams& params);
Track2DState kalman_update(const Track2DState& state, const BBox2D& measurement,
                           const Tracker2DParams& params);

// ---------------------------------------------------------------------------
// Tracklets

struct TrackletEntry {
  int frame_index = 0;
  BBox2D bbox;
  int payload = -1;  // caller-defined reference (e.g. label index or object id)
};

struct Tracklet {
  int id = 0;
  std::vector<TrackletEntry> entries;  // strictly increasing frame indices
};

struct Detection2D {
  BBox2D bbox;
  int payload = -1;
};

// SORT loop over ordered frames. A track is confirmed after `min_hits`
// consecutive matches and killed after `max_age` consecutive misses;
// confirmed tracklets keep their full entry chain, including the frames
// seen before confirmation.
std::vector<Tracklet> track_sequence_2d(const std::vector<std::vector<Detection2D>>& frames,
                                        const Tracker2DParams& params);

// ---------------------------------------------------------------------------
// 3D tracker (constant velocity on position, static yaw and size;
// association by 3D center distance)

struct Tracker3DParams {
  double gate_distance = 2.5;  // meters
  int min_hits = 2;
  int max_age = 3;

  double process_pos_var = 0.01;
  double process_vel_var = 0.25;
  double process_yaw_var = 1e-4;
  double process_size_var = 1e-6;

  double meas_pos_var = 0.25;
  double meas_yaw_var = 0.01;
  double meas_size_var = 0.01;

  double init_pos_var = 1.0;
  double init_vel_var = 25.0;
  double init_yaw_var = 0.1;
  double init_size_var = 0.1;
};

struct Track3DState {
  Eigen::Matrix<double, 10, 1> mean;  // x, y, z, yaw, l, w, h, vx, vy, vz
  Eigen::Matrix<double, 10, 10> covariance;
  int id = 0;
  int age = 0;
  int hits = 0;
  int time_since_update = 0;
};

struct Detection3D {
  Box3D box;
  double score = 1.0;
  int payload = -1;
};

struct TrackedBox3D {
  int track_id = 0;
  Box3D box;
  int payload = -1;
};

Track3DState make_track_3d(const Box3D& box, int id, const Tracker3DParams& params);
Track3DState kalman_predict_3d(const Track3DState& state, const Tracker3DParams& params);
Track3DState kalman_update_3d(const Track3DState& state, const Box3D& measurement,
                              const Tracker3DParams& params);

// Per-frame outputs: confirmed tracks that were updated in that frame.
std::vector<std::vector<TrackedBox3D>> track_sequence_3d(
    const std::vector<std::vector<Detection3D>>& frames, const Tracker3DParams& params);

}  // namespace prt::tracking
