#pragma once

#include "spoofshield/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <unordered_map>
#include <vector>

namespace spoofshield {

/// One sampled point of a lane polyline, map frame (x east, y north), meters.
struct LanePoint {
  double x = 0.0;
  double y = 0.0;
  std::string lane_id;
};

/// Directed segment between two consecutive sampling points of one lane.
struct LaneSegment {
  Vec2 start{0, 0};
  Vec2 end{0, 0};
  int lane = -1;       // index into LaneMap::lanes()
  double heading = 0;  // atan2(end - start), (-pi, pi]

  Vec2 direction() const { return (end - start).normalized(); }
  double length() const { return (end - start).norm(); }
  bool vertical(double tol = 1e-12) const { return std::abs(end.x() - start.x()) <= tol; }
  /// Slope/intercept of the carrier line; only meaningful when !vertical().
  double slope() const { return (end.y() - start.y()) / (end.x() - start.x()); }
  double intercept() const { return start.y() - slope() * start.x(); }
};

/// Orthogonal projection of a query point onto a segment's carrier line.
struct Projection {
  Vec2 foot{0, 0};
  double distance = 0.0;   // Euclidean distance query -> foot, >= 0
  bool on_segment = false; // foot within the endpoint bounds
  int segment_index = -1;
};

/// Vector-form projection; identical to the slope/intercept construction
/// where the slope exists, and well defined for vertical segments.
Projection project(const Vec2& point, const LaneSegment& seg);

enum class MatchStatus { ok, no_match, heading_singular };

/// Result of matching a position against the map.
///
/// d_map is signed: positive when the matched lane lies to the vehicle's
/// left. theta_prime is the segment-minus-vehicle heading after aligning
/// the segment direction with the direction of travel.
struct LateralFix {
  MatchStatus status = MatchStatus::no_match;
  double d0 = 0.0;     // unsigned perpendicular distance, meters
  double d_map = 0.0;  // signed heading-corrected lateral distance
  double theta_prime = 0.0;
  int segment_index = -1;

  bool usable() const { return status == MatchStatus::ok; }
};

struct MatchParams {
  double search_radius = 30.0;           // meters
  double heading_cap = deg2rad(60.0);    // |theta'| at or above this flags the fix
};

/// Immutable polyline HD map with a uniform-grid segment index.
class LaneMap {
 public:
  struct Lane {
    std::string id;
    std::vector<Vec2> points;
  };

  /// Builds segments between consecutive points and indexes them.
  /// Throws std::invalid_argument on a degenerate lane (< 2 points or
  /// consecutive points closer than 1e-9 m) or non-finite coordinates.
  LaneMap(std::vector<Lane> lanes, double sampling_spacing);

  static LaneMap from_json(const nlohmann::json& j, double sampling_spacing);
  static LaneMap load(const std::string& path, double sampling_spacing);
  nlohmann::json to_json() const;

  /// Minimum-distance on-segment match within params.search_radius, with
  /// the Eq.-style heading correction applied. On equal d0 the segment
  /// whose heading is closest to vehicle_heading wins. A fix whose
  /// |theta'| reaches heading_cap is still returned, flagged
  /// heading_singular.
  LateralFix match_lateral(const Vec2& point, double vehicle_heading,
                           const MatchParams& params = {}) const;

  /// Indices of every segment whose cell neighborhood intersects the query
  /// disc; a superset of the true candidates.
  std::vector<int> segments_near(const Vec2& point, double radius) const;

  const std::vector<LaneSegment>& segments() const { return segments_; }
  const std::vector<Lane>& lanes() const { return lanes_; }
  double sampling_spacing() const { return sampling_spacing_; }

  static constexpr double kCellSize = 10.0;  // meters

 private:
  std::int64_t cell_key(double x, double y) const;

  std::vector<Lane> lanes_;
  std::vector<LaneSegment> segments_;
  std::unordered_map<std::int64_t, std::vector<int>> grid_;
  double sampling_spacing_ = 1.0;
};

}  // namespace spoofshield
