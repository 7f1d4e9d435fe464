#include "spoofshield/fuse.hpp"

#include <cmath>

namespace spoofshield {

Mat2 process_noise(const NoiseConfig& noise, double v, double dt) {
  const double q = (noise.v * dt) * (noise.v * dt) + (v * noise.theta * dt) * (v * noise.theta * dt);
  return std::max(q, 1e-12) * Mat2::Identity();
}

namespace {

// Symmetric square root of lambda * cov with negative eigenvalues clamped;
// falls back to the prior when the eigensolver fails.
Mat2 sigma_root(Mat2 cov, double lambda, const Mat2& prior_cov, bool* reset) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  if (es.info() != Eigen::Success) {
    es.compute(prior_cov);
    if (reset) *reset = true;
  }
  const Vec2 ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * (lambda * ev.array()).sqrt().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

SigmaSet draw_sigma(const Vec2& mean, const Mat2& cov, double lambda, const Mat2& prior_cov,
                    bool* reset) {
  constexpr int N = 2;
  SigmaSet s;
  const Mat2 root = sigma_root(cov, lambda, prior_cov, reset);
  s.points[0] = mean;
  for (int i = 0; i < N; ++i) {
    s.points[1 + i] = mean + root.col(i);
    s.points[1 + N + i] = mean - root.col(i);
  }
  s.weights[0] = (lambda - N) / lambda;
  for (int i = 1; i < kSigmaCount; ++i) s.weights[i] = 0.5 / lambda;
  return s;
}

}  // namespace

UkfPrediction ukf_predict(const Belief& belief, const ControlInput& u, const UkfConfig& cfg,
                          const Mat2& prior_cov) {
  constexpr int N = 2;
  UkfPrediction out;
  const double lambda = N + cfg.kappa_ut;

  SigmaSet prior = draw_sigma(belief.mean, belief.cov, lambda, prior_cov, &out.cov_reset);
  for (Vec2& p : prior.points) p = motion_model(p, u);

  out.mean = Vec2::Zero();
  for (int i = 0; i < kSigmaCount; ++i) out.mean += prior.weights[i] * prior.points[i];
  Mat2 p = Mat2::Zero();
  for (int i = 0; i < kSigmaCount; ++i) {
    const Vec2 d = prior.points[i] - out.mean;
    p += prior.weights[i] * d * d.transpose();
  }
  out.cov = 0.5 * (p + p.transpose()) + cfg.Q;
  // redraw around the predicted moments so the measurement update sees the
  // process noise too
  out.sigma = draw_sigma(out.mean, out.cov, lambda, prior_cov, &out.cov_reset);
  return out;
}

std::optional<double> map_lateral_measurement(const Vec2& position, double heading,
                                              const LaneMap& map, const MatchParams& params) {
  const LateralFix fix = map.match_lateral(position, heading, params);
  if (!fix.usable()) return std::nullopt;
  return fix.d_map;
}

Belief ekf_step(const Belief& belief, const ControlInput& u, const Vec2& gps, const Mat2& Q,
                double gps_sigma) {
  Belief out = belief;
  out.mean = motion_model(belief.mean, u);
  Mat2 p = belief.cov + Q;
  const Mat2 s = p + gps_sigma * gps_sigma * Mat2::Identity();
  const Mat2 gain = p * s.inverse();
  out.mean += gain * (gps - out.mean);
  p = (Mat2::Identity() - gain) * p;
  out.cov = 0.5 * (p + p.transpose());
  return out;
}

Supervisor::Supervisor(const LaneMap& map, SuperviseConfig cfg,
                       std::vector<std::unique_ptr<Detector>> detectors, size_t primary)
    : map_(map), cfg_(std::move(cfg)), detectors_(std::move(detectors)), primary_(primary) {
  belief_.cov = cfg_.prior_cov;
}

void Supervisor::reset() {
  belief_ = Belief{};
  belief_.cov = cfg_.prior_cov;
  initialized_ = false;
  last_alarm_t_ = -1e18;
  clean_count_ = 0;
  for (auto& d : detectors_) d->reset();
}

TickRecord Supervisor::step(const SensorFrame& frame) {
  TickRecord rec;
  rec.t = frame.t;
  rec.truth = frame.truth;

  if (!initialized_) {
    belief_.mean = frame.gps;
    belief_.cov = cfg_.prior_cov;
    belief_.mode = FilterMode::normal;
    initialized_ = true;
    last_t_ = frame.t;
  }
  const double dt = frame.t - last_t_;
  last_t_ = frame.t;
  const ControlInput u{frame.imu_v, frame.imu_omega, frame.imu_theta, dt};
  const Mat2 Q = process_noise(cfg_.noise, frame.imu_v, std::max(dt, 1e-6));

  // Detection signal: camera lateral vs. map-matched lateral of the
  // configured position source.
  const Vec2 pos_src =
      cfg_.residual_source == ResidualSource::raw_gps ? frame.gps : Vec2(belief_.mean);
  const ResidualSample sample = residual(frame, pos_src, map_, cfg_.match);
  rec.z = sample.z;
  rec.residual_valid = sample.valid;
  rec.d_cam = frame.lane.valid ? frame.lane.c0 : 0.0;
  rec.d_map = sample.valid ? frame.lane.c0 - sample.z : 0.0;

  for (auto& det : detectors_) rec.verdicts.push_back(det->step(sample));
  DetectorVerdict primary;  // no detectors = never alarms
  primary.t = frame.t;
  if (primary_ < rec.verdicts.size()) primary = rec.verdicts[primary_];
  rec.alarm = primary.alarm;
  rec.score = primary.score;

  // Mode latch: any alarmed tick (decided or held) keeps GPS isolated;
  // re-admission needs the hold-off plus consecutive clean verdicts.
  if (primary.alarm) {
    last_alarm_t_ = frame.t;
    clean_count_ = 0;
    if (cfg_.mitigation_enabled) belief_.mode = FilterMode::mitigation;
  } else if (belief_.mode == FilterMode::mitigation) {
    if (primary.decided) ++clean_count_;
    if (frame.t - last_alarm_t_ >= cfg_.t_hold && clean_count_ >= cfg_.readmit_clean)
      belief_.mode = FilterMode::normal;
  }

  UkfConfig ukf_cfg;
  ukf_cfg.kappa_ut = cfg_.kappa_ut;
  ukf_cfg.Q = Q;
  ukf_cfg.R = std::max(cfg_.noise.cam * cfg_.noise.cam, 1e-8);

  if (belief_.mode == FilterMode::normal) {
    const FilterMode mode = belief_.mode;
    belief_ = ekf_step(belief_, u, frame.gps, Q, cfg_.noise.gps);
    belief_.mode = mode;
  } else {
    const UkfPrediction pred = ukf_predict(belief_, u, ukf_cfg, cfg_.prior_cov);
    if (frame.lane.valid) {
      const UkfUpdate upd = ukf_update(pred, frame.lane.c0, ukf_cfg, [&](const Vec2& x) {
        return map_lateral_measurement(x, frame.imu_theta, map_, cfg_.match);
      });
      if (upd.skipped) {
        belief_.mean = pred.mean;
        belief_.cov = pred.cov;
      } else {
        belief_.mean = upd.belief.mean;
        belief_.cov = upd.belief.cov;
      }
    } else {
      belief_.mean = pred.mean;
      belief_.cov = pred.cov;
    }
  }
  belief_.t = frame.t;
  rec.est = belief_.mean;
  rec.mode = belief_.mode;
  return rec;
}

std::vector<TickRecord> supervise(const std::vector<SensorFrame>& frames, const LaneMap& map,
                                  const SuperviseConfig& cfg,
                                  std::vector<std::unique_ptr<Detector>> detectors,
                                  size_t primary) {
  Supervisor sup(map, cfg, std::move(detectors), primary);
  std::vector<TickRecord> out;
  out.reserve(frames.size());
  for (const SensorFrame& f : frames) out.push_back(sup.step(f));
  return out;
}

}  // namespace spoofshield
