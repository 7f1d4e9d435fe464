#pragma once

#include "spoofshield/common.hpp"
#include "spoofshield/detect.hpp"
#include "spoofshield/lane_map.hpp"
#include "spoofshield/sim.hpp"

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace spoofshield {

enum class FilterMode { normal, mitigation };

/// Position estimate (x, y) with covariance; mitigation mode means GPS is
/// isolated and the camera+map UKF is in charge.
struct Belief {
  Vec2 mean{0, 0};
  Mat2 cov = Mat2::Identity();
  FilterMode mode = FilterMode::normal;
  double t = 0.0;
};

struct ControlInput {
  double v = 0.0;
  double omega = 0.0;
  double theta = 0.0;  // IMU heading, exogenous
  double dt = 0.0;
};

/// Unicycle position kick with the heading taken from the IMU.
inline Vec2 motion_model(const Vec2& x, const ControlInput& u) {
  return Vec2(x.x() + u.v * u.dt * std::cos(u.theta), x.y() + u.v * u.dt * std::sin(u.theta));
}

struct UkfConfig {
  double kappa_ut = 1.0;  // sigma-point spread; N = 2 fixed by the state
  Mat2 Q = 1e-4 * Mat2::Identity();
  double R = 0.0025;      // camera lateral variance, m^2
};

/// Isotropic process noise from the IMU noise figures.
Mat2 process_noise(const NoiseConfig& noise, double v, double dt);

inline constexpr int kSigmaCount = 5;  // 2N + 1, N = 2

struct SigmaSet {
  std::array<Vec2, kSigmaCount> points;    // propagated through the motion model
  std::array<double, kSigmaCount> weights; // sum to 1 by construction
};

struct UkfPrediction {
  Vec2 mean{0, 0};
  Mat2 cov = Mat2::Zero();
  SigmaSet sigma;
  bool cov_reset = false;  // square root failed; covariance fell back to the prior
};

/// Sigma points from the symmetric matrix square root (eigendecomposition,
/// negative eigenvalues clamped to zero), propagated through the motion
/// model; predicted moments plus Q.
UkfPrediction ukf_predict(const Belief& belief, const ControlInput& u, const UkfConfig& cfg,
                          const Mat2& prior_cov = Mat2::Identity());

struct UkfUpdate {
  Belief belief;
  bool skipped = false;  // a sigma point failed the measurement function
  double predicted_measurement = 0.0;
};

/// Scalar-measurement unscented update; MeasureFn maps Vec2 ->
/// std::optional<double> and any failed sigma point skips the update.
template <typename MeasureFn>
UkfUpdate ukf_update(const UkfPrediction& pred, double y, const UkfConfig& cfg, MeasureFn&& h) {
  UkfUpdate out;
  out.belief.mean = pred.mean;
  out.belief.cov = pred.cov;

  std::array<double, kSigmaCount> yhat{};
  for (int i = 0; i < kSigmaCount; ++i) {
    const std::optional<double> v = h(pred.sigma.points[i]);
    if (!v) {
      out.skipped = true;
      return out;
    }
    yhat[i] = *v;
  }
  double y_mean = 0.0;
  for (int i = 0; i < kSigmaCount; ++i) y_mean += pred.sigma.weights[i] * yhat[i];
  double p_y = cfg.R;
  Vec2 p_xy = Vec2::Zero();
  for (int i = 0; i < kSigmaCount; ++i) {
    const double dy = yhat[i] - y_mean;
    p_y += pred.sigma.weights[i] * dy * dy;
    p_xy += pred.sigma.weights[i] * (pred.sigma.points[i] - pred.mean) * dy;
  }
  const Vec2 gain = p_xy / p_y;
  out.belief.mean = pred.mean + gain * (y - y_mean);
  Mat2 cov = pred.cov - gain * p_y * gain.transpose();
  cov = 0.5 * (cov + cov.transpose());
  // clamp tiny negative eigenvalues from the subtraction
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  Vec2 ev = es.eigenvalues().cwiseMax(0.0);
  out.belief.cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out.predicted_measurement = y_mean;
  return out;
}

/// Lateral-distance measurement via map matching, sharing the camera's
/// sign convention.
std::optional<double> map_lateral_measurement(const Vec2& position, double heading,
                                              const LaneMap& map, const MatchParams& params = {});

/// Standard linear KF step on position with identity measurement model.
Belief ekf_step(const Belief& belief, const ControlInput& u, const Vec2& gps, const Mat2& Q,
                double gps_sigma);

enum class ResidualSource { raw_gps, belief_mean };

struct SuperviseConfig {
  double kappa_ut = 1.0;
  double t_hold = 2.0;        // seconds of no alarm before leaving mitigation
  int readmit_clean = 5;      // consecutive decided no-alarm verdicts required
  bool mitigation_enabled = true;
  ResidualSource residual_source = ResidualSource::raw_gps;
  MatchParams match;
  NoiseConfig noise;          // supplies Q, R = cam^2 and GPS sigma
  Mat2 prior_cov = 0.25 * Mat2::Identity();
};

struct TickRecord {
  double t = 0.0;
  FilterMode mode = FilterMode::normal;
  bool alarm = false;
  double score = 0.0;          // primary detector
  Vec2 est{0, 0};
  std::optional<TruthPose> truth;
  double d_cam = 0.0;
  double d_map = 0.0;
  double z = 0.0;
  bool residual_valid = false;
  std::vector<DetectorVerdict> verdicts;  // one per detector, caller order
};

/// Per-tick state machine around the two filters: EKF fusion of GPS+IMU in
/// normal mode; on alarm GPS is isolated and the camera+map UKF takes
/// over, reverting after the hold-off once verdicts stay clean.
class Supervisor {
 public:
  Supervisor(const LaneMap& map, SuperviseConfig cfg,
             std::vector<std::unique_ptr<Detector>> detectors, size_t primary = 0);

  TickRecord step(const SensorFrame& frame);
  const Belief& belief() const { return belief_; }
  void reset();

 private:
  const LaneMap& map_;
  SuperviseConfig cfg_;
  std::vector<std::unique_ptr<Detector>> detectors_;
  size_t primary_;
  Belief belief_;
  bool initialized_ = false;
  double last_t_ = 0.0;
  double last_alarm_t_ = -1e18;
  int clean_count_ = 0;
};

/// Runs the supervisor over a whole trace.
std::vector<TickRecord> supervise(const std::vector<SensorFrame>& frames, const LaneMap& map,
                                  const SuperviseConfig& cfg,
                                  std::vector<std::unique_ptr<Detector>> detectors,
                                  size_t primary = 0);

}  // namespace spoofshield
