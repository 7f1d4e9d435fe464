#pragma once

#include "spoofshield/fuse.hpp"
#include "spoofshield/sim.hpp"

#include <string>
#include <vector>

namespace spoofshield {

/// Truth / estimate / raw GPS trajectories over the map extent, mitigation
/// stretches of the estimate highlighted. Self-contained SVG.
void write_trajectory_svg(const std::string& path, const std::vector<TickRecord>& records,
                          const std::vector<SensorFrame>& frames);

/// Residual and primary-detector score against its threshold over time,
/// with a band marking mitigation mode.
void write_residual_svg(const std::string& path, const std::vector<TickRecord>& records,
                        double threshold);

}  // namespace spoofshield
