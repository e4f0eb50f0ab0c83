#include "prt/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "prt/metrics.hpp"

namespace prt::tracking {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    // Solve on the transpose and invert the mapping.
    const std::vector<int> col_to_row = solve_assignment(cost.transpose());
    std::vector<int> row_to_col(rows, -1);
    for (int c = 0; c < cols; ++c)
      if (col_to_row[c] >= 0) row_to_col[col_to_row[c]] = c;
    return row_to_col;
  }

  const int n = rows, m = cols;
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Association associate(const std::vector<BBox2D>& tracks, const std::vector<BBox2D>& detections,
                      double iou_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0)
    throw std::invalid_argument("associate: iou threshold must be in [0, 1]");
  Association out;
  if (tracks.empty() || detections.empty()) {
    for (size_t i = 0; i < tracks.size(); ++i) out.unmatched_tracks.push_back(static_cast<int>(i));
    for (size_t j = 0; j < detections.size(); ++j) out.unmatched_detections.push_back(static_cast<int>(j));
    return out;
  }
  Eigen::MatrixXd iou(tracks.size(), detections.size());
  for (size_t i = 0; i < tracks.size(); ++i)
    for (size_t j = 0; j < detections.size(); ++j)
      iou(i, j) = metrics::iou_2d(tracks[i], detections[j]);

  const std::vector<int> row_to_col = solve_assignment(-iou);
  std::vector<char> det_matched(detections.size(), 0);
  for (size_t i = 0; i < tracks.size(); ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && iou(i, j) >= iou_threshold) {
      out.matches.emplace_back(static_cast<int>(i), j);
      det_matched[j] = 1;
    } else {
      out.unmatched_tracks.push_back(static_cast<int>(i));
    }
  }
  for (size_t j = 0; j < detections.size(); ++j)
    if (!det_matched[j]) out.unmatched_detections.push_back(static_cast<int>(j));
  return out;
}

// ---------------------------------------------------------------------------
// 2D Kalman filter

Eigen::Matrix<double, 7, 7> transition_matrix_2d() {
  Eigen::Matrix<double, 7, 7> f = Eigen::Matrix<double, 7, 7>::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

Eigen::Matrix<double, 4, 7> observation_matrix_2d() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = h(3, 3) = 1.0;
  return h;
}

Eigen::Matrix<double, 7, 7> process_noise_2d(const Track2DState& state, const Tracker2DParams& p) {
  const double s = std::max(state.mean(2), 1.0);
  Eigen::Matrix<double, 7, 7> q = Eigen::Matrix<double, 7, 7>::Zero();
  q(0, 0) = q(1, 1) = p.process_pos_var;
  q(2, 2) = (p.process_area_rel * s) * (p.process_area_rel * s);
  q(3, 3) = p.process_aspect_var;
  q(4, 4) = q(5, 5) = p.process_vel_var;
  q(6, 6) = (p.process_area_rel * s) * (p.process_area_rel * s);
  return q;
}

Eigen::Matrix4d measurement_noise_2d(const Eigen::Vector4d& meas, const Tracker2DParams& p) {
  const double s = std::max(meas(2), 1.0);
  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  r(0, 0) = r(1, 1) = p.meas_pos_var;
  r(2, 2) = (p.meas_area_rel * s) * (p.meas_area_rel * s);
  r(3, 3) = p.meas_aspect_var;
  return r;
}

Eigen::Vector4d box_to_measurement(const BBox2D& box) {
  box.validate();
  return {box.cx(), box.cy(), box.area(), box.width() / box.height()};
}

BBox2D measurement_to_box(const Eigen::Vector4d& m) {
  const double s = std::max(m(2), 1e-6);
  const double r = std::max(m(3), 1e-6);
  const double w = std::sqrt(s * r);
  const double h = std::sqrt(s / r);
  return {m(0) - w / 2.0, m(1) - h / 2.0, m(0) + w / 2.0, m(1) + h / 2.0};
}

Track2DState make_track_2d(const BBox2D& box, int id, const Tracker2DParams& p) {
  const Eigen::Vector4d z = box_to_measurement(box);
  Track2DState t;
  t.mean.setZero();
  t.mean.head<4>() = z;
  t.covariance.setZero();
  t.covariance(0, 0) = t.covariance(1, 1) = p.init_pos_var;
  t.covariance(2, 2) = (p.init_area_rel * z(2)) * (p.init_area_rel * z(2)) + 1.0;
  t.covariance(3, 3) = p.init_aspect_var;
  t.covariance(4, 4) = t.covariance(5, 5) = p.init_vel_var;
  t.covariance(6, 6) = (p.init_area_rel * z(2)) * (p.init_area_rel * z(2)) + 1.0;
  t.id = id;
  t.hits = 1;
  return t;
}

namespace {

template <int N>
Eigen::Matrix<double, N, N> symmetrized(const Eigen::Matrix<double, N, N>& m) {
  return 0.5 * (m + m.transpose());
}

template <int N>
void check_psd(const Eigen::Matrix<double, N, N>& m, const char* where) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw std::runtime_error(std::string(where) + ": covariance lost positive semidefiniteness");
}

}  // namespace

Track2DState kalman_predict(const Track2DState& state, const Tracker2DParams& p) {
  const auto f = transition_matrix_2d();
  Track2DState out = state;
  out.mean = f * state.mean;
  out.covariance = symmetrized<7>(f * state.covariance * f.transpose() + process_noise_2d(state, p));
  out.age += 1;
  out.time_since_update += 1;
  return out;
}

Track2DState kalman_update(const Track2DState& state, const BBox2D& measurement,
                           const Tracker2DParams& p) {
  const auto h = observation_matrix_2d();
  const Eigen::Vector4d z = box_to_measurement(measurement);
  const Eigen::Matrix4d r = measurement_noise_2d(z, p);
  const Eigen::Vector4d innovation = z - h * state.mean;
  const Eigen::Matrix4d s = h * state.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 7, 4> k = state.covariance * h.transpose() * s.inverse();
  Track2DState out = state;
  out.mean = state.mean + k * innovation;
  const Eigen::Matrix<double, 7, 7> id = Eigen::Matrix<double, 7, 7>::Identity();
  // Joseph form keeps the covariance PSD under rounding.
  out.covariance = symmetrized<7>((id - k * h) * state.covariance * (id - k * h).transpose() +
                                  k * r * k.transpose());
  check_psd<7>(out.covariance, "kalman_update");
  out.mean(2) = std::max(out.mean(2), 1e-6);
  out.mean(3) = std::max(out.mean(3), 1e-6);
  out.hits += 1;
  out.time_since_update = 0;
  return out;
}

std::vector<Tracklet> track_sequence_2d(const std::vector<std::vector<Detection2D>>& frames,
                                        const Tracker2DParams& params) {
  struct Active {
    Track2DState state;
    int hit_streak = 0;
    bool confirmed = false;
    Tracklet tracklet;
  };
  std::vector<Active> active;
  std::vector<Tracklet> finished;
  int next_id = 0;

  const auto retire = [&](Active& a) {
    if (a.confirmed) finished.push_back(std::move(a.tracklet));
  };

  for (size_t f = 0; f < frames.size(); ++f) {
    const auto& dets = frames[f];
    std::vector<BBox2D> predicted;
    predicted.reserve(active.size());
    for (auto& a : active) {
      a.state = kalman_predict(a.state, params);
      predicted.push_back(measurement_to_box(a.state.mean.head<4>()));
    }
    std::vector<BBox2D> det_boxes;
    det_boxes.reserve(dets.size());
    for (const auto& d : dets) det_boxes.push_back(d.bbox);

    const Association assoc = associate(predicted, det_boxes, params.iou_threshold);

    for (const auto& [ti, di] : assoc.matches) {
      Active& a = active[ti];
      a.state = kalman_update(a.state, dets[di].bbox, params);
      a.hit_streak += 1;
      if (a.hit_streak >= params.min_hits) a.confirmed = true;
      a.tracklet.entries.push_back({static_cast<int>(f), dets[di].bbox, dets[di].payload});
    }
    for (int ti : assoc.unmatched_tracks) active[ti].hit_streak = 0;

    std::vector<Active> survivors;
    for (auto& a : active) {
      if (a.state.time_since_update > params.max_age) {
        retire(a);
      } else {
        survivors.push_back(std::move(a));
      }
    }
    active = std::move(survivors);

    for (int di : assoc.unmatched_detections) {
      Active a;
      a.state = make_track_2d(dets[di].bbox, next_id, params);
      a.hit_streak = 1;
      a.confirmed = params.min_hits <= 1;
      a.tracklet.id = next_id;
      a.tracklet.entries.push_back({static_cast<int>(f), dets[di].bbox, dets[di].payload});
      ++next_id;
      active.push_back(std::move(a));
    }
  }
  for (auto& a : active) retire(a);
  std::sort(finished.begin(), finished.end(),
            [](const Tracklet& a, const Tracklet& b) { return a.id < b.id; });
  return finished;
}

// ---------------------------------------------------------------------------
// 3D tracker

namespace {

Eigen::Matrix<double, 10, 10> transition_matrix_3d() {
  Eigen::Matrix<double, 10, 10> f = Eigen::Matrix<double, 10, 10>::Identity();
  f(0, 7) = 1.0;
  f(1, 8) = 1.0;
  f(2, 9) = 1.0;
  return f;
}

Eigen::Matrix<double, 7, 1> box_to_measurement_3d(const Box3D& box) {
  box.validate();
  Eigen::Matrix<double, 7, 1> z;
  z << box.center.x(), box.center.y(), box.center.z(), box.yaw, box.size.x(), box.size.y(), box.size.z();
  return z;
}

Box3D state_to_box_3d(const Track3DState& s) {
  Box3D b;
  b.center = s.mean.head<3>();
  b.yaw = s.mean(3);
  b.size = {std::max(s.mean(4), 1e-3), std::max(s.mean(5), 1e-3), std::max(s.mean(6), 1e-3)};
  return b;
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

Track3DState make_track_3d(const Box3D& box, int id, const Tracker3DParams& p) {
  Track3DState t;
  t.mean.setZero();
  t.mean.head<7>() = box_to_measurement_3d(box);
  t.covariance.setZero();
  t.covariance(0, 0) = t.covariance(1, 1) = t.covariance(2, 2) = p.init_pos_var;
  t.covariance(3, 3) = p.init_yaw_var;
  t.covariance(4, 4) = t.covariance(5, 5) = t.covariance(6, 6) = p.init_size_var;
  t.covariance(7, 7) = t.covariance(8, 8) = t.covariance(9, 9) = p.init_vel_var;
  t.id = id;
  t.hits = 1;
  return t;
}

Track3DState kalman_predict_3d(const Track3DState& state, const Tracker3DParams& p) {
  const auto f = transition_matrix_3d();
  Eigen::Matrix<double, 10, 10> q = Eigen::Matrix<double, 10, 10>::Zero();
  q(0, 0) = q(1, 1) = q(2, 2) = p.process_pos_var;
  q(3, 3) = p.process_yaw_var;
  q(4, 4) = q(5, 5) = q(6, 6) = p.process_size_var;
  q(7, 7) = q(8, 8) = q(9, 9) = p.process_vel_var;
  Track3DState out = state;
  out.mean = f * state.mean;
  out.covariance = 0.5 * ((f * state.covariance * f.transpose() + q) +
                          (f * state.covariance * f.transpose() + q).transpose());
  out.age += 1;
  out.time_since_update += 1;
  return out;
}

Track3DState kalman_update_3d(const Track3DState& state, const Box3D& measurement,
                              const Tracker3DParams& p) {
  Eigen::Matrix<double, 7, 10> h = Eigen::Matrix<double, 7, 10>::Zero();
  h.topLeftCorner<7, 7>().setIdentity();
  Eigen::Matrix<double, 7, 7> r = Eigen::Matrix<double, 7, 7>::Zero();
  r(0, 0) = r(1, 1) = r(2, 2) = p.meas_pos_var;
  r(3, 3) = p.meas_yaw_var;
  r(4, 4) = r(5, 5) = r(6, 6) = p.meas_size_var;

  Eigen::Matrix<double, 7, 1> innovation = box_to_measurement_3d(measurement) - h * state.mean;
  innovation(3) = wrap_angle(innovation(3));
  const Eigen::Matrix<double, 7, 7> s = h * state.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 10, 7> k = state.covariance * h.transpose() * s.inverse();
  Track3DState out = state;
  out.mean = state.mean + k * innovation;
  const Eigen::Matrix<double, 10, 10> id = Eigen::Matrix<double, 10, 10>::Identity();
  out.covariance = 0.5 * (((id - k * h) * state.covariance * (id - k * h).transpose() +
                           k * r * k.transpose()) +
                          ((id - k * h) * state.covariance * (id - k * h).transpose() +
                           k * r * k.transpose()).transpose());
  check_psd<10>(out.covariance, "kalman_update_3d");
  out.hits += 1;
  out.time_since_update = 0;
  return out;
}

std::vector<std::vector<TrackedBox3D>> track_sequence_3d(
    const std::vector<std::vector<Detection3D>>& frames, const Tracker3DParams& params) {
  struct Active {
    Track3DState state;
    int hit_streak = 0;
    bool confirmed = false;
  };
  std::vector<Active> active;
  std::vector<std::vector<TrackedBox3D>> outputs(frames.size());
  int next_id = 0;

  for (size_t f = 0; f < frames.size(); ++f) {
    const auto& dets = frames[f];
    for (auto& a : active) a.state = kalman_predict_3d(a.state, params);

    Association assoc;
    if (!active.empty() && !dets.empty()) {
      Eigen::MatrixXd dist(active.size(), dets.size());
      for (size_t i = 0; i < active.size(); ++i)
        for (size_t j = 0; j < dets.size(); ++j)
          dist(i, j) = (active[i].state.mean.head<3>() - dets[j].box.center).norm();
      const std::vector<int> row_to_col = solve_assignment(dist);
      std::vector<char> det_matched(dets.size(), 0);
      for (size_t i = 0; i < active.size(); ++i) {
        const int j = row_to_col[i];
        if (j >= 0 && dist(i, j) <= params.gate_distance) {
          assoc.matches.emplace_back(static_cast<int>(i), j);
          det_matched[j] = 1;
        } else {
          assoc.unmatched_tracks.push_back(static_cast<int>(i));
        }
      }
      for (size_t j = 0; j < dets.size(); ++j)
        if (!det_matched[j]) assoc.unmatched_detections.push_back(static_cast<int>(j));
    } else {
      for (size_t i = 0; i < active.size(); ++i) assoc.unmatched_tracks.push_back(static_cast<int>(i));
      for (size_t j = 0; j < dets.size(); ++j) assoc.unmatched_detections.push_back(static_cast<int>(j));
    }

    for (const auto& [ti, di] : assoc.matches) {
      Active& a = active[ti];
      a.state = kalman_update_3d(a.state, dets[di].box, params);
      a.hit_streak += 1;
      if (a.hit_streak >= params.min_hits) a.confirmed = true;
      if (a.confirmed)
        outputs[f].push_back({a.state.id, state_to_box_3d(a.state), dets[di].payload});
    }
    for (int ti : assoc.unmatched_tracks) active[ti].hit_streak = 0;

    std::erase_if(active, [&](const Active& a) { return a.state.time_since_update > params.max_age; });

    for (int di : assoc.unmatched_detections) {
      Active a;
      a.state = make_track_3d(dets[di].box, next_id, params);
      a.hit_streak = 1;
      a.confirmed = params.min_hits <= 1;
      if (a.confirmed)
        outputs[f].push_back({next_id, state_to_box_3d(a.state), dets[di].payload});
      ++next_id;
      active.push_back(std::move(a));
    }
  }
  return outputs;
}

}  // namespace prt::tracking
