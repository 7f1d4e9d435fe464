#pragma once

#include "spoofshield/common.hpp"
#include "spoofshield/lane_map.hpp"
#include "spoofshield/sim.hpp"

#include <string>

namespace spoofshield {

/// Per-tick detection signal: camera lateral distance minus map-matched
/// lateral distance of the position estimate.
struct ResidualSample {
  double t = 0.0;
  double z = 0.0;  // meters, d_cam - d_map
  bool valid = false;
};

ResidualSample residual(const SensorFrame& frame, const Vec2& position_estimate,
                        const LaneMap& map, const MatchParams& params = {});

/// decided = false means the detector could not evaluate this tick (invalid
/// sample or cold window); alarm then carries the previous state.
struct DetectorVerdict {
  double t = 0.0;
  bool alarm = false;
  double score = 0.0;
  double threshold = 0.0;
  bool decided = false;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorVerdict step(const ResidualSample& sample) = 0;
  virtual void reset() = 0;
  virtual std::string name() const = 0;
};

}  // namespace spoofshield
