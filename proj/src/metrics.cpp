#include "prt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "prt/tracking.hpp"

namespace prt::metrics {

DepthMetrics depth_metrics(const std::vector<double>& pred, const std::vector<double>& gt,
                           bool use_log10) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("depth_metrics: need equal nonempty prediction/gt lists");
  double abs_rel = 0, sq_rel = 0, mse = 0, msle = 0;
  long within = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], g = gt[i];
    if (!(p > 0.0) || !(g > 0.0))
      throw std::invalid_argument("depth_metrics: depths must be positive");
    const double diff = p - g;
    abs_rel += std::abs(diff) / g;
    sq_rel += diff * diff / g;
    mse += diff * diff;
    const double lp = use_log10 ? std::log10(p) : std::log(p);
    const double lg = use_log10 ? std::log10(g) : std::log(g);
    msle += (lp - lg) * (lp - lg);
    if (std::max(p / g, g / p) < 1.25) ++within;
  }
  const double n = static_cast<double>(pred.size());
  return {abs_rel / n, sq_rel / n, std::sqrt(mse / n), std::sqrt(msle / n), within / n};
}

double iou_2d(const BBox2D& a, const BBox2D& b) {
  a.validate();
  b.validate();
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

namespace {

using Point2 = Eigen::Vector2d;

std::vector<Point2> footprint(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = b.size.x() / 2.0, hw = b.size.y() / 2.0;
  const Point2 center(b.center.x(), b.center.z());
  std::vector<Point2> pts;
  for (const auto& [lx, lz] : {std::pair{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}) {
    pts.emplace_back(center.x() + c * lx - s * lz, center.y() + s * lx + c * lz);
  }
  return pts;
}

double polygon_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(a) / 2.0;
}

// Sutherland-Hodgman clip of a convex polygon against the half-plane on
// the left of edge (e0 -> e1), assuming counter-clockwise clip polygon.
std::vector<Point2> clip_edge(const std::vector<Point2>& poly, const Point2& e0, const Point2& e1) {
  std::vector<Point2> out;
  const auto side = [&](const Point2& p) {
    return (e1.x() - e0.x()) * (p.y() - e0.y()) - (e1.y() - e0.y()) * (p.x() - e0.x());
  };
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point2& cur = poly[i];
    const Point2& nxt = poly[(i + 1) % poly.size()];
    const double sc = side(cur), sn = side(nxt);
    if (sc >= 0) out.push_back(cur);
    if ((sc >= 0) != (sn >= 0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

std::vector<Point2> counter_clockwise(std::vector<Point2> poly) {
  double signed_area = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    signed_area += p.x() * q.y() - q.x() * p.y();
  }
  if (signed_area < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double footprint_intersection(const Box3D& a, const Box3D& b) {
  std::vector<Point2> subject = footprint(a);
  const std::vector<Point2> clip = counter_clockwise(footprint(b));
  for (size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    subject = clip_edge(subject, clip[i], clip[(i + 1) % clip.size()]);
  }
  if (subject.size() < 3) return 0.0;
  return polygon_area(subject);
}

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  a.validate();
  b.validate();
  const double inter = footprint_intersection(a, b);
  const double area_a = a.size.x() * a.size.y();
  const double area_b = b.size.x() * b.size.y();
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  a.validate();
  b.validate();
  const double inter_bev = footprint_intersection(a, b);
  const double y_lo = std::max(a.center.y() - a.size.z() / 2.0, b.center.y() - b.size.z() / 2.0);
  const double y_hi = std::min(a.center.y() + a.size.z() / 2.0, b.center.y() + b.size.z() / 2.0);
  const double dy = std::max(0.0, y_hi - y_lo);
  const double inter = inter_bev * dy;
  const double vol_a = a.size.prod();
  const double vol_b = b.size.prod();
  const double uni = vol_a + vol_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double average_precision(const std::vector<DetectionRecord>& detections,
                         const std::vector<GroundTruth3D>& ground_truth,
                         const std::function<double(const Box3D&, const Box3D&)>& iou_fn,
                         double iou_threshold) {
  if (ground_truth.empty() || detections.empty()) return 0.0;
  for (const auto& d : detections)
    if (!std::isfinite(d.score)) throw std::invalid_argument("average_precision: scores must be finite");

  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::map<int, std::vector<size_t>> gts_by_frame;
  for (size_t g = 0; g < ground_truth.size(); ++g)
    gts_by_frame[ground_truth[g].frame_index].push_back(g);
  std::vector<char> gt_matched(ground_truth.size(), 0);

  std::vector<double> precision, recall;
  long tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    const DetectionRecord& det = detections[order[rank]];
    double best_iou = 0.0;
    size_t best_gt = 0;
    bool found = false;
    const auto it = gts_by_frame.find(det.frame_index);
    if (it != gts_by_frame.end()) {
      for (size_t g : it->second) {
        if (gt_matched[g]) continue;
        const double iou = iou_fn(det.box, ground_truth[g].box);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best_gt = g;
          found = true;
        }
      }
    }
    if (found) {
      gt_matched[best_gt] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(ground_truth.size()));
  }

  // Monotone envelope, integrated over every recall step.
  double ap = 0.0;
  double max_precision = 0.0;
  double prev_recall_at = 0.0;
  std::vector<double> envelope(precision.size());
  for (size_t i = precision.size(); i-- > 0;) {
    max_precision = std::max(max_precision, precision[i]);
    envelope[i] = max_precision;
  }
  for (size_t i = 0; i < precision.size(); ++i) {
    const double r = recall[i];
    if (r > prev_recall_at) {
      ap += (r - prev_recall_at) * envelope[i];
      prev_recall_at = r;
    }
  }
  return ap;
}

MotReport mot_metrics(const std::vector<std::vector<MotBox>>& tracked,
                      const std::vector<std::vector<MotBox>>& ground_truth,
                      double match_distance) {
  if (tracked.size() != ground_truth.size())
    throw std::invalid_argument("mot_metrics: frame counts must align");
  MotReport report;
  std::map<int, int> last_match;  // gt id -> last matched track id

  for (size_t f = 0; f < ground_truth.size(); ++f) {
    const auto& gts = ground_truth[f];
    const auto& hyps = tracked[f];
    report.gt_count += static_cast<int>(gts.size());

    std::vector<char> gt_done(gts.size(), 0), hyp_done(hyps.size(), 0);
    std::vector<std::pair<size_t, size_t>> frame_matches;

    // Persist previous pairings that are still within the gate.
    for (size_t g = 0; g < gts.size(); ++g) {
      const auto it = last_match.find(gts[g].id);
      if (it == last_match.end()) continue;
      for (size_t h = 0; h < hyps.size(); ++h) {
        if (hyp_done[h] || hyps[h].id != it->second) continue;
        if ((gts[g].position - hyps[h].position).norm() <= match_distance) {
          gt_done[g] = 1;
          hyp_done[h] = 1;
          frame_matches.emplace_back(g, h);
        }
        break;
      }
    }

    // Optimal assignment on what remains.
    std::vector<size_t> free_gts, free_hyps;
    for (size_t g = 0; g < gts.size(); ++g)
      if (!gt_done[g]) free_gts.push_back(g);
    for (size_t h = 0; h < hyps.size(); ++h)
      if (!hyp_done[h]) free_hyps.push_back(h);
    if (!free_gts.empty() && !free_hyps.empty()) {
      Eigen::MatrixXd dist(free_gts.size(), free_hyps.size());
      for (size_t i = 0; i < free_gts.size(); ++i)
        for (size_t j = 0; j < free_hyps.size(); ++j)
          dist(i, j) = (gts[free_gts[i]].position - hyps[free_hyps[j]].position).norm();
      const std::vector<int> row_to_col = tracking::solve_assignment(dist);
      for (size_t i = 0; i < free_gts.size(); ++i) {
        const int j = row_to_col[i];
        if (j >= 0 && dist(i, j) <= match_distance) {
          gt_done[free_gts[i]] = 1;
          hyp_done[free_hyps[j]] = 1;
          frame_matches.emplace_back(free_gts[i], free_hyps[j]);
        }
      }
    }

    for (const auto& [g, h] : frame_matches) {
      const int gt_id = gts[g].id;
      const int track_id = hyps[h].id;
      const auto it = last_match.find(gt_id);
      if (it != last_match.end() && it->second != track_id) ++report.ids;
      last_match[gt_id] = track_id;
      ++report.matches;
    }
    for (size_t g = 0; g < gts.size(); ++g)
      if (!gt_done[g]) ++report.fn;
    for (size_t h = 0; h < hyps.size(); ++h)
      if (!hyp_done[h]) ++report.fp;
  }

  if (report.gt_count > 0) {
    report.mota = 1.0 - static_cast<double>(report.fp + report.fn + report.ids) /
                            static_cast<double>(report.gt_count);
  }
  return report;
}

}  // namespace prt::metrics
