#pragma once

#include "spoofshield/common.hpp"
#include "spoofshield/lane_map.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spoofshield {

/// One stretch of road centerline with constant curvature (0 = straight,
/// positive = left turn), traversed in order.
struct RoadPiece {
  double length = 0.0;     // meters along the centerline
  double curvature = 0.0;  // 1/m
};

/// Piecewise-constant speed profile; v(t) = v of the last point with t' <= t.
struct SpeedPoint {
  double t = 0.0;
  double v = 10.0;
};

struct NoiseConfig {
  double gps = 0.5;      // m, per axis
  double v = 0.1;        // m/s
  double omega = 0.01;   // rad/s
  double theta = 0.005;  // rad
  double cam = 0.05;     // m, on C0
};

/// "Carla-like" default noise and a near-ideal "dsd" preset.
NoiseConfig noise_preset(const std::string& name);

struct ScenarioConfig {
  std::vector<RoadPiece> road{{1000.0, 0.0}};
  double lane_offset = 1.5;  // vehicle offset to the LEFT of the centerline, m
  std::vector<SpeedPoint> speed{{0.0, 10.0}};
  double duration = 30.0;    // s
  double tick_rate = 10.0;   // Hz
  NoiseConfig noise;
  double map_spacing = 1.0;    // m between lane sampling points
  double camera_window = 40.0; // m of lane ahead used by the camera model
  std::uint64_t seed = 1;

  double dt() const { return 1.0 / tick_rate; }
  void validate() const;  // throws std::invalid_argument

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Ground-truth pose/speed at one tick.
struct VehicleState {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading, (-pi, pi]
  double v = 0.0;      // >= 0
  double omega = 0.0;  // yaw rate
};

struct TruthPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Cubic lane model in the vehicle frame (x forward, y left):
/// y(x) = c0 + c1 x + c2 x^2 + c3 x^3. c0 is the signed lateral distance
/// of the lane at the vehicle origin, positive to the left.
struct LaneObservation {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  bool valid = false;
};

struct SensorFrame {
  double t = 0.0;
  Vec2 gps{0, 0};
  double imu_v = 0.0;
  double imu_omega = 0.0;
  double imu_theta = 0.0;
  LaneObservation lane;
  std::optional<TruthPose> truth;
};

/// Vehicle path at the configured offset from the centerline, stepped with
/// the exact constant-curvature solution of the unicycle model per tick.
/// duration * tick_rate + 1 states, t = k/tick_rate.
std::vector<VehicleState> generate_truth(const ScenarioConfig& cfg);

/// Centerline sampled at cfg.map_spacing, padded past the driven extent by
/// the camera window so the forward fit never runs off the map.
LaneMap build_scenario_map(const ScenarioConfig& cfg);

/// Least-squares cubic over the lane points ahead of the vehicle
/// (vehicle-frame x in [0, window]). valid = false with fewer than 4 points.
LaneObservation fit_lane_cubic(const VehicleState& state, const LaneMap& map,
                               double window = 40.0);

/// Named per-sensor noise streams fanned out from one master seed.
class SensorRng {
 public:
  explicit SensorRng(std::uint64_t seed);
  double gps();    // standard normal draws, one stream per sensor
  double v();
  double omega();
  double theta();
  double cam();

 private:
  std::mt19937_64 gps_, v_, omega_, theta_, cam_;
  std::normal_distribution<double> n_{0.0, 1.0};
};

SensorFrame sense(const VehicleState& state, const LaneMap& map,
                  const ScenarioConfig& cfg, SensorRng& rng);

/// generate_truth + sense over the whole scenario.
std::vector<SensorFrame> simulate(const ScenarioConfig& cfg, const LaneMap& map);

/// Trace CSV: t,gps_x,gps_y,imu_v,imu_omega,imu_theta,cam_c0..cam_c3,
/// truth_x,truth_y,truth_theta. Doubles round-trip exactly. Invalid camera
/// observations serialize as empty cells; truth columns may be empty.
void write_trace_csv(const std::string& path, const std::vector<SensorFrame>& frames);

/// Parses a trace CSV. If the camera cells are empty and a map is given,
/// lane observations are recomputed from truth (preferred) or GPS.
/// Throws std::runtime_error naming the offending line on malformed rows
/// or non-monotone timestamps.
std::vector<SensorFrame> ingest_csv(const std::string& path, const LaneMap* map = nullptr,
                                    double camera_window = 40.0);

}  // namespace spoofshield
