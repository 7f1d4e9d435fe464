#include "spoofshield/detect.hpp"

namespace spoofshield {

ResidualSample residual(const SensorFrame& frame, const Vec2& position_estimate,
                        const LaneMap& map, const MatchParams& params) {
  ResidualSample s;
  s.t = frame.t;
  if (!frame.lane.valid) return s;
  const LateralFix fix = map.match_lateral(position_estimate, frame.imu_theta, params);
  if (!fix.usable()) return s;
  s.z = frame.lane.c0 - fix.d_map;
  s.valid = true;
  return s;
}

}  // namespace spoofshield
