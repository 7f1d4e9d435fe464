#include "spoofshield/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spoofshield {

namespace {

// Exact pose advance along a constant-curvature path.
void advance_pose(double& x, double& y, double& theta, double kappa, double ds) {
  if (std::abs(kappa) < 1e-12) {
    x += ds * std::cos(theta);
    y += ds * std::sin(theta);
  } else {
    const double t1 = theta + kappa * ds;
    x += (std::sin(t1) - std::sin(theta)) / kappa;
    y += (-std::cos(t1) + std::cos(theta)) / kappa;
    theta = t1;
  }
  theta = wrap_angle(theta);
}

double speed_at(const std::vector<SpeedPoint>& profile, double t) {
  double v = profile.front().v;
  for (const SpeedPoint& p : profile) {
    if (p.t <= t + 1e-12) v = p.v;
  }
  return v;
}

// Piece index and curvature at centerline arclength s; the last piece
// extends past its nominal length.
const RoadPiece& piece_at(const std::vector<RoadPiece>& road, double s) {
  double acc = 0.0;
  for (const RoadPiece& p : road) {
    acc += p.length;
    if (s < acc) return p;
  }
  return road.back();
}

double remaining_in_piece(const std::vector<RoadPiece>& road, double s) {
  double acc = 0.0;
  for (size_t i = 0; i + 1 < road.size(); ++i) {
    acc += road[i].length;
    if (s < acc) return acc - s;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

NoiseConfig noise_preset(const std::string& name) {
  if (name == "carla") return NoiseConfig{};
  if (name == "dsd") return NoiseConfig{0.05, 0.01, 0.001, 0.0005, 0.005};
  if (name == "zero") return NoiseConfig{0.0, 0.0, 0.0, 0.0, 0.0};
  throw std::invalid_argument("unknown noise preset: " + name);
}

void ScenarioConfig::validate() const {
  if (tick_rate <= 0.0) throw std::invalid_argument("scenario: tick_rate must be > 0");
  if (duration <= 0.0) throw std::invalid_argument("scenario: duration must be > 0");
  if (map_spacing <= 0.0) throw std::invalid_argument("scenario: map_spacing must be > 0");
  if (road.empty()) throw std::invalid_argument("scenario: empty road");
  for (const RoadPiece& p : road) {
    if (p.length <= 0.0) throw std::invalid_argument("scenario: road piece length must be > 0");
    if (std::abs(lane_offset * p.curvature) >= 0.95)
      throw std::invalid_argument("scenario: lane offset too large for road curvature");
  }
  if (speed.empty()) throw std::invalid_argument("scenario: empty speed profile");
  for (const SpeedPoint& p : speed)
    if (p.v < 0.0) throw std::invalid_argument("scenario: speed must be >= 0");
  const double sigmas[] = {noise.gps, noise.v, noise.omega, noise.theta, noise.cam};
  for (double s : sigmas)
    if (s < 0.0) throw std::invalid_argument("scenario: noise sigma must be >= 0");
}

std::vector<VehicleState> generate_truth(const ScenarioConfig& cfg) {
  cfg.validate();
  const double o = cfg.lane_offset;
  const double dt = cfg.dt();
  const int ticks = static_cast<int>(std::llround(cfg.duration * cfg.tick_rate));

  // Vehicle path = centerline shifted o to the left; the parallel curve of
  // curvature kappa has curvature kappa / (1 - o*kappa).
  double s_c = 0.0;  // progress along the centerline
  double x = 0.0, y = 0.0, theta = 0.0;
  {
    // start pose: centerline origin, heading 0, left normal (0, 1)
    y = o;
  }

  std::vector<VehicleState> out;
  out.reserve(ticks + 1);
  for (int k = 0; k <= ticks; ++k) {
    const double t = k * dt;
    const double v = speed_at(cfg.speed, t);
    const double kappa0 = piece_at(cfg.road, s_c).curvature;
    const double kv0 = kappa0 / (1.0 - o * kappa0);
    out.push_back({t, x, y, theta, v, v * kv0});
    if (k == ticks) break;

    double remaining = dt;
    while (remaining > 1e-15) {
      const double kappa = piece_at(cfg.road, s_c).curvature;
      const double scale = 1.0 - o * kappa;  // ds_vehicle = scale * ds_centerline
      const double kv = kappa / scale;
      const double to_boundary_s = remaining_in_piece(cfg.road, s_c);
      const double to_boundary_t = to_boundary_s * scale / std::max(v, 1e-12);
      const double tau = std::min(remaining, to_boundary_t);
      advance_pose(x, y, theta, kv, v * tau);
      s_c += v * tau / scale;
      remaining -= tau;
      if (v <= 1e-12) break;  // stationary: nothing more happens this tick
    }
  }
  return out;
}

LaneMap build_scenario_map(const ScenarioConfig& cfg) {
  cfg.validate();
  // Centerline arclength consumed by the drive.
  double s_total = 0.0;
  {
    const double o = cfg.lane_offset;
    const int ticks = static_cast<int>(std::llround(cfg.duration * cfg.tick_rate));
    const double dt = cfg.dt();
    double s_c = 0.0;
    for (int k = 0; k < ticks; ++k) {
      const double v = speed_at(cfg.speed, k * dt);
      double remaining = dt;
      while (remaining > 1e-15 && v > 1e-12) {
        const double kappa = piece_at(cfg.road, s_c).curvature;
        const double scale = 1.0 - o * kappa;
        const double to_boundary_t = remaining_in_piece(cfg.road, s_c) * scale / v;
        const double tau = std::min(remaining, to_boundary_t);
        s_c += v * tau / scale;
        remaining -= tau;
      }
    }
    s_total = s_c;
  }

  const double pad = cfg.camera_window + 2.0 * cfg.map_spacing;
  const double s_end = s_total + pad;
  const double s_begin = -2.0 * cfg.map_spacing;

  LaneMap::Lane lane;
  lane.id = "center";
  double x = 0.0, y = 0.0, theta = 0.0, s = 0.0;
  // walk backwards first for the leading pad
  advance_pose(x, y, theta, cfg.road.front().curvature, s_begin);
  s = s_begin;
  while (s <= s_end) {
    lane.points.emplace_back(x, y);
    const double kappa = piece_at(cfg.road, std::max(s, 0.0)).curvature;
    const double step = std::min(cfg.map_spacing, std::max(remaining_in_piece(cfg.road, std::max(s, 0.0)),
                                                           1e-6));
    advance_pose(x, y, theta, kappa, step);
    s += step;
  }
  return LaneMap({std::move(lane)}, cfg.map_spacing);
}

LaneObservation fit_lane_cubic(const VehicleState& state, const LaneMap& map, double window) {
  LaneObservation obs;
  const Vec2 pos(state.x, state.y);
  const double c = std::cos(state.theta), s = std::sin(state.theta);

  // Nearest lane to the vehicle supplies the points.
  int best_lane = -1;
  size_t best_point = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t li = 0; li < map.lanes().size(); ++li) {
    const auto& pts = map.lanes()[li].points;
    for (size_t pi = 0; pi < pts.size(); ++pi) {
      const double d2 = (pts[pi] - pos).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best_lane = static_cast<int>(li);
        best_point = pi;
      }
    }
  }
  if (best_lane < 0) return obs;

  const auto to_vehicle = [&](const Vec2& p) {
    const Vec2 d = p - pos;
    return Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
  };

  // Walk outward from the nearest point and stop once the forward window is
  // left, so only the contiguous stretch of lane the camera actually sees is
  // fitted; a lane looping back into the window stays invisible.
  const auto& pts = map.lanes()[best_lane].points;
  std::vector<Vec2> local;  // vehicle frame: x forward, y left
  for (size_t i = best_point; i < pts.size(); ++i) {
    const Vec2 q = to_vehicle(pts[i]);
    if (q.x() >= 0.0 && q.x() <= window)
      local.push_back(q);
    else if (i > best_point)
      break;
  }
  for (size_t i = best_point; i-- > 0;) {
    const Vec2 q = to_vehicle(pts[i]);
    if (q.x() >= 0.0 && q.x() <= window)
      local.push_back(q);
    else
      break;
  }
  if (local.size() < 4) return obs;

  // Scale x by the window for conditioning; unscale the coefficients after.
  Eigen::MatrixXd A(local.size(), 4);
  Eigen::VectorXd b(local.size());
  for (size_t i = 0; i < local.size(); ++i) {
    const double u = local[i].x() / window;
    A(i, 0) = 1.0;
    A(i, 1) = u;
    A(i, 2) = u * u;
    A(i, 3) = u * u * u;
    b(i) = local[i].y();
  }
  const Eigen::Vector4d a = A.colPivHouseholderQr().solve(b);
  obs.c0 = a(0);
  obs.c1 = a(1) / window;
  obs.c2 = a(2) / (window * window);
  obs.c3 = a(3) / (window * window * window);
  obs.valid = true;
  return obs;
}

SensorRng::SensorRng(std::uint64_t seed)
    : gps_(make_stream(seed, "gps")),
      v_(make_stream(seed, "imu_v")),
      omega_(make_stream(seed, "imu_omega")),
      theta_(make_stream(seed, "imu_theta")),
      cam_(make_stream(seed, "camera")) {}

double SensorRng::gps() { return n_(gps_); }
double SensorRng::v() { return n_(v_); }
double SensorRng::omega() { return n_(omega_); }
double SensorRng::theta() { return n_(theta_); }
double SensorRng::cam() { return n_(cam_); }

SensorFrame sense(const VehicleState& state, const LaneMap& map, const ScenarioConfig& cfg,
                  SensorRng& rng) {
  SensorFrame f;
  f.t = state.t;
  f.gps = Vec2(state.x + cfg.noise.gps * rng.gps(), state.y + cfg.noise.gps * rng.gps());
  f.imu_v = state.v + cfg.noise.v * rng.v();
  f.imu_omega = state.omega + cfg.noise.omega * rng.omega();
  f.imu_theta = wrap_angle(state.theta + cfg.noise.theta * rng.theta());
  f.lane = fit_lane_cubic(state, map, cfg.camera_window);
  const double cam_draw = rng.cam();  // consumed unconditionally, keeps streams aligned
  if (f.lane.valid) f.lane.c0 += cfg.noise.cam * cam_draw;
  f.truth = TruthPose{state.x, state.y, state.theta};
  return f;
}

std::vector<SensorFrame> simulate(const ScenarioConfig& cfg, const LaneMap& map) {
  SensorRng rng(cfg.seed);
  std::vector<SensorFrame> frames;
  for (const VehicleState& s : generate_truth(cfg)) frames.push_back(sense(s, map, cfg, rng));
  return frames;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_cell(const std::string& cell, int line, const char* col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad value for " + col);
  if (!std::isfinite(v))
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": non-finite " + col);
  return v;
}

}  // namespace

void write_trace_csv(const std::string& path, const std::vector<SensorFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,gps_x,gps_y,imu_v,imu_omega,imu_theta,cam_c0,cam_c1,cam_c2,cam_c3,"
         "truth_x,truth_y,truth_theta\n";
  for (const SensorFrame& f : frames) {
    out << fmt_double(f.t) << ',' << fmt_double(f.gps.x()) << ',' << fmt_double(f.gps.y()) << ','
        << fmt_double(f.imu_v) << ',' << fmt_double(f.imu_omega) << ',' << fmt_double(f.imu_theta)
        << ',';
    if (f.lane.valid)
      out << fmt_double(f.lane.c0) << ',' << fmt_double(f.lane.c1) << ',' << fmt_double(f.lane.c2)
          << ',' << fmt_double(f.lane.c3);
    else
      out << ",,,";
    out << ',';
    if (f.truth)
      out << fmt_double(f.truth->x) << ',' << fmt_double(f.truth->y) << ','
          << fmt_double(f.truth->theta);
    else
      out << ",,";
    out << '\n';
  }
}

std::vector<SensorFrame> ingest_csv(const std::string& path, const LaneMap* map,
                                    double camera_window) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace csv: empty file " + path);
  const std::string expect =
      "t,gps_x,gps_y,imu_v,imu_omega,imu_theta,cam_c0,cam_c1,cam_c2,cam_c3,"
      "truth_x,truth_y,truth_theta";
  if (line != expect) throw std::runtime_error("trace csv line 1: unexpected header");

  std::vector<SensorFrame> frames;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 13) cells.emplace_back();
    if (cells.size() != 13)
      throw std::runtime_error("trace csv line " + std::to_string(lineno) + ": wrong column count");

    SensorFrame f;
    f.t = parse_cell(cells[0], lineno, "t");
    f.gps = Vec2(parse_cell(cells[1], lineno, "gps_x"), parse_cell(cells[2], lineno, "gps_y"));
    f.imu_v = parse_cell(cells[3], lineno, "imu_v");
    f.imu_omega = parse_cell(cells[4], lineno, "imu_omega");
    f.imu_theta = parse_cell(cells[5], lineno, "imu_theta");
    const bool has_cam = !cells[6].empty();
    if (has_cam) {
      f.lane.c0 = parse_cell(cells[6], lineno, "cam_c0");
      f.lane.c1 = parse_cell(cells[7], lineno, "cam_c1");
      f.lane.c2 = parse_cell(cells[8], lineno, "cam_c2");
      f.lane.c3 = parse_cell(cells[9], lineno, "cam_c3");
      f.lane.valid = true;
    }
    if (!cells[10].empty()) {
      f.truth = TruthPose{parse_cell(cells[10], lineno, "truth_x"),
                          parse_cell(cells[11], lineno, "truth_y"),
                          parse_cell(cells[12], lineno, "truth_theta")};
    }
    if (!has_cam && map != nullptr) {
      VehicleState s;
      s.x = f.truth ? f.truth->x : f.gps.x();
      s.y = f.truth ? f.truth->y : f.gps.y();
      s.theta = f.truth ? f.truth->theta : f.imu_theta;
      f.lane = fit_lane_cubic(s, *map, camera_window);
    }
    if (!frames.empty() && f.t <= frames.back().t)
      throw std::runtime_error("trace csv line " + std::to_string(lineno) +
                               ": non-monotone timestamp");
    frames.push_back(std::move(f));
  }
  return frames;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  if (j.contains("road")) {
    cfg.road.clear();
    for (const auto& jp : j.at("road"))
      cfg.road.push_back({jp.at("length").get<double>(), jp.value("curvature", 0.0)});
  }
  cfg.lane_offset = j.value("lane_offset", cfg.lane_offset);
  if (j.contains("speed")) {
    cfg.speed.clear();
    const auto& js = j.at("speed");
    if (js.is_number()) {
      cfg.speed.push_back({0.0, js.get<double>()});
    } else {
      for (const auto& jp : js) cfg.speed.push_back({jp.at("t").get<double>(), jp.at("v").get<double>()});
    }
  }
  cfg.duration = j.value("duration", cfg.duration);
  cfg.tick_rate = j.value("tick_rate", cfg.tick_rate);
  if (j.contains("noise")) {
    const auto& jn = j.at("noise");
    if (jn.is_string()) {
      cfg.noise = noise_preset(jn.get<std::string>());
    } else {
      if (jn.contains("preset")) cfg.noise = noise_preset(jn.at("preset").get<std::string>());
      cfg.noise.gps = jn.value("gps", cfg.noise.gps);
      cfg.noise.v = jn.value("v", cfg.noise.v);
      cfg.noise.omega = jn.value("omega", cfg.noise.omega);
      cfg.noise.theta = jn.value("theta", cfg.noise.theta);
      cfg.noise.cam = jn.value("cam", cfg.noise.cam);
    }
  }
  cfg.map_spacing = j.value("map_spacing", cfg.map_spacing);
  cfg.camera_window = j.value("camera_window", cfg.camera_window);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  auto& jr = j["road"] = nlohmann::json::array();
  for (const RoadPiece& p : road) jr.push_back({{"length", p.length}, {"curvature", p.curvature}});
  j["lane_offset"] = lane_offset;
  auto& js = j["speed"] = nlohmann::json::array();
  for (const SpeedPoint& p : speed) js.push_back({{"t", p.t}, {"v", p.v}});
  j["duration"] = duration;
  j["tick_rate"] = tick_rate;
  j["noise"] = {{"gps", noise.gps}, {"v", noise.v}, {"omega", noise.omega},
                {"theta", noise.theta}, {"cam", noise.cam}};
  j["map_spacing"] = map_spacing;
  j["camera_window"] = camera_window;
  j["seed"] = seed;
  return j;
}

}  // namespace spoofshield
