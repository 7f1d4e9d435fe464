#include "spoofshield/lane_map.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace spoofshield {

Projection project(const Vec2& point, const LaneSegment& seg) {
  const Vec2 ab = seg.end - seg.start;
  const double len2 = ab.squaredNorm();
  const double t = (point - seg.start).dot(ab) / len2;
  Projection p;
  p.foot = seg.start + t * ab;
  p.distance = (point - p.foot).norm();
  // Endpoint bound of the foot, expressed on the dominant axis (x for
  // ordinary segments, y for vertical ones). Tolerance 1e-12 m.
  const double tol = 1e-12;
  if (seg.vertical()) {
    const double lo = std::min(seg.start.y(), seg.end.y());
    const double hi = std::max(seg.start.y(), seg.end.y());
    p.on_segment = p.foot.y() >= lo - tol && p.foot.y() <= hi + tol;
  } else {
    const double lo = std::min(seg.start.x(), seg.end.x());
    const double hi = std::max(seg.start.x(), seg.end.x());
    p.on_segment = p.foot.x() >= lo - tol && p.foot.x() <= hi + tol;
  }
  return p;
}

LaneMap::LaneMap(std::vector<Lane> lanes, double sampling_spacing)
    : lanes_(std::move(lanes)), sampling_spacing_(sampling_spacing) {
  if (lanes_.empty()) throw std::invalid_argument("LaneMap: no lanes");
  for (int li = 0; li < static_cast<int>(lanes_.size()); ++li) {
    const Lane& lane = lanes_[li];
    if (lane.points.size() < 2)
      throw std::invalid_argument("LaneMap: lane '" + lane.id + "' has fewer than 2 points");
    for (size_t i = 0; i < lane.points.size(); ++i) {
      if (!lane.points[i].allFinite())
        throw std::invalid_argument("LaneMap: non-finite point in lane '" + lane.id + "'");
      if (i > 0 && (lane.points[i] - lane.points[i - 1]).norm() <= 1e-9)
        throw std::invalid_argument("LaneMap: duplicate consecutive points in lane '" + lane.id + "'");
    }
    for (size_t i = 0; i + 1 < lane.points.size(); ++i) {
      LaneSegment s;
      s.start = lane.points[i];
      s.end = lane.points[i + 1];
      s.lane = li;
      s.heading = std::atan2(s.end.y() - s.start.y(), s.end.x() - s.start.x());
      segments_.push_back(s);
    }
  }
  // Grid index: each segment registered in every cell its bounding box touches.
  for (int si = 0; si < static_cast<int>(segments_.size()); ++si) {
    const LaneSegment& s = segments_[si];
    const int x0 = static_cast<int>(std::floor(std::min(s.start.x(), s.end.x()) / kCellSize));
    const int x1 = static_cast<int>(std::floor(std::max(s.start.x(), s.end.x()) / kCellSize));
    const int y0 = static_cast<int>(std::floor(std::min(s.start.y(), s.end.y()) / kCellSize));
    const int y1 = static_cast<int>(std::floor(std::max(s.start.y(), s.end.y()) / kCellSize));
    for (int cx = x0; cx <= x1; ++cx)
      for (int cy = y0; cy <= y1; ++cy)
        grid_[(static_cast<std::int64_t>(cx) << 32) ^ (static_cast<std::int64_t>(cy) & 0xffffffffll)]
            .push_back(si);
  }
}

std::int64_t LaneMap::cell_key(double x, double y) const {
  const auto cx = static_cast<std::int64_t>(std::floor(x / kCellSize));
  const auto cy = static_cast<std::int64_t>(std::floor(y / kCellSize));
  return (cx << 32) ^ (cy & 0xffffffffll);
}

std::vector<int> LaneMap::segments_near(const Vec2& point, double radius) const {
  std::vector<int> out;
  const int r = static_cast<int>(std::ceil(radius / kCellSize)) + 1;
  const int cx = static_cast<int>(std::floor(point.x() / kCellSize));
  const int cy = static_cast<int>(std::floor(point.y() / kCellSize));
  for (int dx = -r; dx <= r; ++dx) {
    for (int dy = -r; dy <= r; ++dy) {
      const std::int64_t key =
          (static_cast<std::int64_t>(cx + dx) << 32) ^ (static_cast<std::int64_t>(cy + dy) & 0xffffffffll);
      auto it = grid_.find(key);
      if (it != grid_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LateralFix LaneMap::match_lateral(const Vec2& point, double vehicle_heading,
                                  const MatchParams& params) const {
  LateralFix fix;
  double best_d = std::numeric_limits<double>::infinity();
  double best_heading_gap = std::numeric_limits<double>::infinity();
  Projection best_proj;
  constexpr double kTieTol = 1e-9;

  for (int si : segments_near(point, params.search_radius)) {
    Projection proj = project(point, segments_[si]);
    if (!proj.on_segment || proj.distance > params.search_radius) continue;
    const double gap =
        std::abs(wrap_angle(segments_[si].heading - vehicle_heading));
    const double aligned_gap = std::min(gap, kPi - gap);
    const bool better = proj.distance < best_d - kTieTol ||
                        (proj.distance < best_d + kTieTol && aligned_gap < best_heading_gap);
    if (better) {
      best_d = proj.distance;
      best_heading_gap = aligned_gap;
      best_proj = proj;
      best_proj.segment_index = si;
    }
  }
  if (best_proj.segment_index < 0) return fix;  // no_match

  const LaneSegment& seg = segments_[best_proj.segment_index];
  // Align the segment direction with the direction of travel so theta'
  // and the left/right sign are independent of polyline orientation.
  Vec2 dir = seg.direction();
  double theta1 = seg.heading;
  if (std::cos(theta1 - vehicle_heading) < 0.0) {
    dir = -dir;
    theta1 = wrap_angle(theta1 + kPi);
  }
  const double theta_prime = wrap_angle(theta1 - vehicle_heading);
  // Lane to the vehicle's left <=> vehicle right of the lane direction.
  const double side = cross2(dir, point - best_proj.foot) > 0.0 ? -1.0 : 1.0;

  fix.d0 = best_proj.distance;
  fix.theta_prime = theta_prime;
  fix.segment_index = best_proj.segment_index;
  fix.d_map = side * fix.d0 / std::cos(theta_prime);
  fix.status = std::abs(theta_prime) >= params.heading_cap ? MatchStatus::heading_singular
                                                           : MatchStatus::ok;
  return fix;
}

LaneMap LaneMap::from_json(const nlohmann::json& j, double sampling_spacing) {
  std::vector<Lane> lanes;
  for (const auto& jl : j) {
    Lane lane;
    lane.id = jl.at("lane_id").get<std::string>();
    for (const auto& jp : jl.at("points"))
      lane.points.emplace_back(jp.at(0).get<double>(), jp.at(1).get<double>());
    lanes.push_back(std::move(lane));
  }
  return LaneMap(std::move(lanes), sampling_spacing);
}

LaneMap LaneMap::load(const std::string& path, double sampling_spacing) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("LaneMap: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j, sampling_spacing);
}

nlohmann::json LaneMap::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const Lane& lane : lanes_) {
    nlohmann::json jl;
    jl["lane_id"] = lane.id;
    auto& pts = jl["points"] = nlohmann::json::array();
    for (const Vec2& p : lane.points) pts.push_back({p.x(), p.y()});
    j.push_back(std::move(jl));
  }
  return j;
}

}  // namespace spoofshield
