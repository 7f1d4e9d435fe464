#pragma once

#include "spoofshield/detect.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <vector>

namespace spoofshield {

struct CusumParams {
  double mu0 = 0.0;    // reference residual mean
  double kappa = 0.1;  // drift allowance
  double h = 1.0;      // decision threshold

  nlohmann::json to_json() const;
  static CusumParams from_json(const nlohmann::json& j);
};

/// Two-sided CUSUM on the raw residual stream:
///   S+ = max(0, S+ + (z - mu0) - kappa)
///   S- = max(0, S- - (z - mu0) - kappa)
/// alarm iff max(S+, S-) > h. Invalid samples hold state.
class CusumDetector : public Detector {
 public:
  explicit CusumDetector(CusumParams params) : params_(params) {}

  DetectorVerdict step(const ResidualSample& sample) override;
  void reset() override;
  std::string name() const override { return "cusum"; }

  const CusumParams& params() const { return params_; }
  double s_plus() const { return s_plus_; }
  double s_minus() const { return s_minus_; }

 private:
  CusumParams params_;
  double s_plus_ = 0.0;
  double s_minus_ = 0.0;
  bool alarm_state_ = false;
};

struct CusumCalibration {
  double kappa_sigmas = 1.0;   // kappa = kappa_sigmas * std(z), tuned for ~2 sigma shifts
  double h_floor_sigmas = 8.0; // lower bound on h in residual sigmas
  double h_margin = 1.25;      // h >= margin * max attack-free statistic
};

/// mu0/kappa from the sample moments; h from replaying the statistic over
/// the attack-free residuals so the calibration data never alarms.
CusumParams cusum_calibrate(std::span<const std::vector<double>> traces,
                            const CusumCalibration& cal = {});

}  // namespace spoofshield
